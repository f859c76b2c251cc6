import pytest

from gridres.binning import DEFAULT_BINNING, BinSpec, _capacity_balanced_bins, bin_vre_sites
from gridres.model import CaseError

from conftest import make_site


def _sites(specs, tech="solar"):
    # specs: (id, cap, lcoe, cf) with a flat 2-hour profile at cf
    return [make_site(sid, "R1", tech, cap, lcoe, [cf, cf]) for sid, cap, lcoe, cf in specs]


def test_default_grids():
    assert DEFAULT_BINNING["solar"] == BinSpec(200.0, 5, 3)
    assert DEFAULT_BINNING["onshore_wind"] == BinSpec(200.0, 5, 3)
    assert DEFAULT_BINNING["offshore_fixed"] == BinSpec(300.0, 3, 2)
    assert DEFAULT_BINNING["offshore_floating"] == BinSpec(300.0, 3, 2)


def test_capacity_balanced_bins_hand_case():
    # four equal-capacity sites into two bins: first two go low, last two high
    sites = _sites([("a", 5, 10, 0.2), ("b", 5, 20, 0.2), ("c", 5, 30, 0.2), ("d", 5, 40, 0.2)])
    bins = _capacity_balanced_bins(sites, lambda s: s.lcoe, 2)
    assert bins == {"a": 0, "b": 0, "c": 1, "d": 1}


def test_bin_boundary_uses_capacity_before_site():
    # one heavy cheap site fills bin 0 by itself
    sites = _sites([("a", 9, 10, 0.2), ("b", 1, 20, 0.2), ("c", 1, 30, 0.2)])
    bins = _capacity_balanced_bins(sites, lambda s: s.lcoe, 2)
    assert bins["a"] == 0
    assert bins["b"] == 1 and bins["c"] == 1


def test_ties_broken_by_site_id():
    sites = _sites([("b", 5, 10, 0.2), ("a", 5, 10, 0.2)])
    bins = _capacity_balanced_bins(sites, lambda s: s.lcoe, 2)
    assert bins == {"a": 0, "b": 1}


def test_cluster_ids_and_membership():
    sites = _sites(
        [("a", 5, 10, 0.1), ("b", 5, 50, 0.1), ("c", 5, 100, 0.9), ("d", 5, 150, 0.9)]
    )
    clusters = bin_vre_sites("R1", sites, hours=2, binning={"solar": BinSpec(200.0, 2, 2)})
    assert all(c.id.startswith("R1_solar_L") for c in clusters)
    members = sorted(m for c in clusters for m in c.members)
    assert members == ["a", "b", "c", "d"]
    assert [c.id for c in clusters] == sorted(c.id for c in clusters)


def test_capacity_conserved_across_bins():
    sites = _sites(
        [("a", 7, 10, 0.1), ("b", 3, 50, 0.3), ("c", 11, 100, 0.6), ("d", 2, 150, 0.9)]
    )
    clusters = bin_vre_sites("R1", sites, hours=2)
    assert sum(c.max_new_capacity for c in clusters) == pytest.approx(23.0, abs=1e-12)


def test_existing_capacity_spread_is_exactly_conserved():
    sites = _sites(
        [("a", 7, 10, 0.1), ("b", 3, 50, 0.3), ("c", 11, 100, 0.6), ("d", 2, 150, 0.9)]
    )
    clusters = bin_vre_sites("R1", sites, hours=2, existing_by_tech={"solar": 10.0})
    assert sum(c.existing_capacity for c in clusters) == 10.0  # residual lands on the last bin


def test_lcoe_filter_rejects_expensive_site():
    sites = _sites([("a", 5, 250.0, 0.2)])
    with pytest.raises(CaseError, match="exceeds the 200.0"):
        bin_vre_sites("R1", sites, hours=2)


def test_offshore_uses_looser_filter():
    sites = _sites([("a", 5, 250.0, 0.4)], tech="offshore_fixed")
    clusters = bin_vre_sites("R1", sites, hours=2)
    assert len(clusters) == 1


def test_fixed_cost_is_capacity_weighted_site_cost():
    # single-member bins carry that site's annualized cost exactly
    sites = _sites([("a", 5, 40.0, 0.5)])
    (cluster,) = bin_vre_sites("R1", sites, hours=2)
    assert cluster.fixed_cost == pytest.approx(40.0 * 0.5 * 2)


def test_techs_bin_independently():
    sites = _sites([("a", 5, 10, 0.2)]) + _sites([("w", 5, 10, 0.2)], tech="onshore_wind")
    clusters = bin_vre_sites("R1", sites, hours=2)
    techs = {c.tech for c in clusters}
    assert techs == {"solar", "onshore_wind"}
