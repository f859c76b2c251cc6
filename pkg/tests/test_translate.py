"""Coarse-to-fine translation rules, checked against hand splits."""

from types import SimpleNamespace

import numpy as np
import pytest

from gridres.model import Region, require_valid
from gridres.prng import Rng
from gridres.spatial import RegionPartition, aggregate_spatial
from gridres.translate import (
    InvestmentVector,
    SiteAllocation,
    allocate_storage,
    allocate_thermal,
    allocate_vre,
    build_portfolio,
    read_allocation,
    redistrict_transmission,
    retire_units,
    translate_solution,
    vre_fill_order,
    write_allocation,
)

from conftest import (
    interregional,
    make_case,
    make_site,
    make_thermal_cluster,
    make_unit,
    make_vre_cluster,
    series,
    spur_line,
)


def site(sid, lcoe, cap, tech="solar"):
    return make_site(sid, "R1", tech, cap, lcoe, [0.5, 0.5])


def investments(**kw):
    """Duck-typed stand-in for a solved expansion's investment fields."""
    base = dict(
        vre_new={}, thermal_new={}, thermal_retired={},
        storage_new_power={}, storage_new_energy={}, line_expansion={},
    )
    base.update(kw)
    return SimpleNamespace(**base)


# -- site fill ---------------------------------------------------------------------


def test_vre_fill_is_cheapest_first():
    sites = [site("s1", 30.0, 3.0), site("s2", 40.0, 3.0)]
    got = allocate_vre(5.0, sites)
    assert [(s.id, mw) for s, mw in got] == [("s1", 3.0), ("s2", 2.0)]


def test_vre_fill_zero_investment_is_empty():
    assert allocate_vre(0.0, [site("s1", 30.0, 3.0)]) == []


def test_vre_fill_lcoe_tie_breaks_by_id():
    sites = [site("sb", 30.0, 2.0), site("sa", 30.0, 2.0)]
    got = allocate_vre(2.0, sites)
    assert [(s.id, mw) for s, mw in got] == [("sa", 2.0)]


def test_fixed_bottom_offshore_fills_before_floating():
    order = vre_fill_order(
        [
            site("float", 20.0, 5.0, tech="offshore_floating"),
            site("fixed", 90.0, 5.0, tech="offshore_fixed"),
        ]
    )
    assert [s.id for s in order] == ["fixed", "float"]


def test_vre_fill_rejects_over_investment():
    with pytest.raises(ValueError, match="exceeds site capacity"):
        allocate_vre(7.0, [site("s1", 30.0, 3.0), site("s2", 40.0, 3.0)])


def test_vre_fill_tolerates_float_cap_slop():
    sites = [site("s1", 30.0, 0.1), site("s2", 40.0, 0.2)]
    got = allocate_vre(0.1 + 0.2, sites)  # binary 0.30000000000000004
    assert sum(mw for _, mw in got) == pytest.approx(0.1 + 0.2, abs=1e-12)


# -- proportional splits -----------------------------------------------------------


def test_thermal_split_follows_demand_exactly():
    assert allocate_thermal(9.0, {"FRCC": 200.0, "SRSE": 100.0}) == {
        "FRCC": 6.0,
        "SRSE": 3.0,
    }


def test_thermal_66_34_split_is_exact():
    got = allocate_thermal(100.0, {"FRCC": 66.0, "SRSE": 34.0})
    assert got == {"FRCC": 66.0, "SRSE": 34.0}


def test_thermal_single_subregion_takes_everything():
    assert allocate_thermal(7.25, {"only": 123.0}) == {"only": 7.25}


def test_thermal_equal_thirds_sum_exactly():
    got = allocate_thermal(10.0, {"a": 1.0, "b": 1.0, "c": 1.0})
    assert sum(got.values()) == 10.0
    assert got["a"] == got["b"] == pytest.approx(10.0 / 3.0)


def test_thermal_rejects_degenerate_weights():
    with pytest.raises(ValueError, match="nonzero"):
        allocate_thermal(5.0, {"a": 0.0, "b": 0.0})
    with pytest.raises(ValueError, match="negative"):
        allocate_thermal(5.0, {"a": 2.0, "b": -1.0})


def test_storage_splits_by_vre_capacity():
    p, e = allocate_storage(10.0, 30.0, {"a": 20.0, "b": 80.0})
    assert p == {"a": 2.0, "b": 8.0}
    assert e == {"a": 6.0, "b": 24.0}


def test_storage_falls_back_to_demand_then_uniform():
    p, _ = allocate_storage(10.0, 0.0, {"a": 0.0, "b": 0.0}, demand_fallback={"a": 1.0, "b": 3.0})
    assert p == {"a": 2.5, "b": 7.5}
    p, _ = allocate_storage(10.0, 0.0, {"a": 0.0, "b": 0.0})
    assert p == {"a": 5.0, "b": 5.0}


# -- retirement --------------------------------------------------------------------


def _unit(uid, hr, cap):
    return make_unit(uid, "R1", "g1", cap, heat_rate=hr)


def test_retirement_hits_least_efficient_first():
    got = retire_units(100.0, [_unit("u1", 7.0, 80.0), _unit("u2", 9.0, 50.0)])
    assert [(u.id, mw) for u, mw in got] == [("u2", 50.0), ("u1", 50.0)]


def test_retirement_heat_rate_tie_breaks_by_id():
    got = retire_units(10.0, [_unit("ub", 8.0, 40.0), _unit("ua", 8.0, 40.0)])
    assert [(u.id, mw) for u, mw in got] == [("ua", 10.0)]


def test_retirement_rejects_more_than_exists():
    with pytest.raises(ValueError, match="exceeds unit capacity"):
        retire_units(200.0, [_unit("u1", 7.0, 80.0)])


def _is_greedy_prefix(pairs, order, cap_of):
    ids = [x.id for x, _ in pairs]
    if ids != [x.id for x in order[: len(ids)]]:
        return False
    # all but the last filled site must be taken whole
    return all(mw == cap_of(x) for x, mw in pairs[:-1])


def test_fill_and_retirement_orders_against_sort_oracle():
    rng = Rng(77)
    for trial in range(40):
        r = rng.derive(f"t{trial}")
        sites = [
            site(f"s{i}", 20.0 + r.below(10), 1.0 + r.below(4)) for i in range(1 + r.below(5))
        ]
        total = sum(s.capacity_limit for s in sites)
        inv = total * r.u01()
        pairs = allocate_vre(inv, sites)
        assert _is_greedy_prefix(pairs, vre_fill_order(sites), lambda s: s.capacity_limit)
        units = [
            _unit(f"u{i}", 6.0 + r.below(6), 10.0 + r.below(30))
            for i in range(1 + r.below(5))
        ]
        cap = sum(u.capacity for u in units)
        ret_pairs = retire_units(cap * r.u01(), units)
        oracle = sorted(units, key=lambda u: (-u.heat_rate, u.id))
        assert _is_greedy_prefix(ret_pairs, oracle, lambda u: u.capacity)


# -- conservation fuzz -------------------------------------------------------------


def test_every_split_conserves_capacity():
    rng = Rng(123)
    for trial in range(100):
        r = rng.derive(f"c{trial}")
        n = 1 + r.below(6)
        sites = [site(f"s{i}", 20.0 + r.u01() * 40, 0.5 + r.u01() * 9) for i in range(n)]
        inv = sum(s.capacity_limit for s in sites) * r.u01()
        assert sum(mw for _, mw in allocate_vre(inv, sites)) == pytest.approx(inv, abs=1e-9)

        weights = {f"r{i}": r.u01() * 1e4 for i in range(1 + r.below(5))}
        amount = r.u01() * 5e3
        if any(w > 0 for w in weights.values()):
            assert sum(allocate_thermal(amount, weights).values()) == pytest.approx(
                amount, abs=1e-9
            )

        pw, en = r.u01() * 100, r.u01() * 400
        p, e = allocate_storage(pw, en, {f"r{i}": r.u01() * 50 for i in range(1 + r.below(4))})
        assert sum(p.values()) == pytest.approx(pw, abs=1e-9)
        assert sum(e.values()) == pytest.approx(en, abs=1e-9)
        units = [_unit(f"u{i}", 5 + r.u01() * 6, 5 + r.u01() * 90) for i in range(1 + r.below(4))]
        ret = sum(u.capacity for u in units) * r.u01()
        assert sum(mw for _, mw in retire_units(ret, units)) == pytest.approx(ret, abs=1e-9)


# -- transmission redistricting ------------------------------------------------------


def _parallel_line_fixture():
    regions = [
        Region(id="A", urban_population=2_000_000, reserve_margin=0.0, demand=series([1.0])),
        Region(id="B", urban_population=1_000_000, reserve_margin=0.0, demand=series([1.0])),
        Region(id="C", urban_population=3_000_000, reserve_margin=0.0, demand=series([1.0])),
        Region(id="D", urban_population=4_000_000, reserve_margin=0.0, demand=series([1.0])),
    ]
    u = make_unit("u1", "A", "gA", 10.0)
    fine = make_case(
        regions,
        [make_thermal_cluster("gA", "A", [u])],
        units=[u],
        lines=[interregional("L1", "A", "C", 4.0), interregional("L2", "B", "D", 16.0)],
    )
    part = RegionPartition.from_mapping({"A": "W", "B": "W", "C": "E", "D": "E"})
    return fine, aggregate_spatial(fine, part)


def test_cross_capacity_splits_by_endpoint_population():
    fine, coarse = _parallel_line_fixture()
    (merged,) = coarse.interregional_lines
    assert merged.capacity == 20.0
    caps = redistrict_transmission(investments(), coarse, fine, SiteAllocation())
    # L1 weighs 2M + 3M, L2 weighs 1M + 4M: an even 10/10 split
    assert caps == {"L1": 10.0, "L2": 10.0}


def test_line_expansion_rides_along_the_split():
    fine, coarse = _parallel_line_fixture()
    (merged,) = coarse.interregional_lines
    sol = investments(line_expansion={merged.id: 4.0})
    caps = redistrict_transmission(sol, coarse, fine, SiteAllocation())
    assert caps == {"L1": 12.0, "L2": 12.0}
    assert sum(caps.values()) == pytest.approx(merged.capacity + 4.0)


def test_internalized_lines_return_scaled_by_beta():
    fine, _ = _parallel_line_fixture()
    part = RegionPartition.from_mapping({"A": "all", "B": "all", "C": "all", "D": "all"})
    coarse = aggregate_spatial(fine, part)
    assert all(l.kind == "backbone" for l in coarse.lines)
    caps = redistrict_transmission(investments(), coarse, fine, SiteAllocation(), beta=0.5)
    assert caps == {"L1": 2.0, "L2": 8.0}


def test_invested_spur_adds_capacity_along_its_path():
    s1 = make_site("s1", "m2", "solar", 8.0, 40.0, [1.0, 0.5])
    fine = make_case(
        [
            Region(id="m1", urban_population=2_000_000, reserve_margin=0.0, demand=series([4.0, 4.0])),
            Region(id="m2", urban_population=0, reserve_margin=0.0, demand=series([1.0, 1.0])),
        ],
        [make_vre_cluster("v1", "m2", [s1])],
        sites=[s1],
        lines=[spur_line(s1), interregional("link", "m1", "m2", 3.0)],
    )
    coarse = aggregate_spatial(fine, RegionPartition.from_mapping({"m1": "W", "m2": "W"}))
    assert coarse.line_by_id["spur_s1"].fine_endpoints == ("m2", "m1")
    alloc = SiteAllocation(site_investment={"s1": 2.0})
    caps = redistrict_transmission(investments(), coarse, fine, alloc)
    # 3 MW comes back from the internalized link, 2 MW rides the spur path
    assert caps == {"link": 3.0 + 2.0}
    bare = redistrict_transmission(investments(), coarse, fine, SiteAllocation())
    assert bare == {"link": 3.0}


def test_missing_fine_line_is_a_hard_error():
    fine, coarse = _parallel_line_fixture()
    (merged,) = coarse.interregional_lines
    gutted = fine.with_updates(lines=())
    with pytest.raises(ValueError, match=f"corresponds to {merged.id}"):
        redistrict_transmission(investments(), coarse, gutted, SiteAllocation())


def test_missing_backbone_target_names_the_line():
    fine, _ = _parallel_line_fixture()
    part = RegionPartition.from_mapping({"A": "all", "B": "all", "C": "all", "D": "all"})
    coarse = aggregate_spatial(fine, part)
    gutted = fine.with_updates(lines=(fine.line_by_id["L2"],))
    with pytest.raises(ValueError, match="backbone L1 crosses A-C"):
        redistrict_transmission(investments(), coarse, gutted, SiteAllocation())


# -- portfolio assembly --------------------------------------------------------------


def test_empty_allocation_reproduces_the_existing_system(synth_small):
    p = build_portfolio(synth_small, SiteAllocation())
    assert all(v == 0.0 for v in p.vre_new.values())
    assert all(v == 0.0 for v in p.thermal_new.values())
    assert all(v == 0.0 for v in p.thermal_retired.values())
    assert set(p.thermal_new) == {c.id for c in synth_small.thermal_clusters}
    assert set(p.vre_new) == {c.id for c in synth_small.vre_clusters}
    for l in synth_small.interregional_lines:
        assert p.line_capacity[l.id] == l.capacity


def test_portfolio_rejects_unknown_entities(synth_small):
    with pytest.raises(ValueError, match="belongs to no fine cluster"):
        build_portfolio(synth_small, SiteAllocation(site_investment={"ghost": 1.0}))
    with pytest.raises(ValueError, match="unknown fine thermal cluster"):
        build_portfolio(synth_small, SiteAllocation(thermal_new={"ghost": 1.0}))
    with pytest.raises(ValueError, match="unknown fine storage"):
        build_portfolio(synth_small, SiteAllocation(storage_power={"ghost": 1.0}))


def test_portfolio_rejects_negative_resulting_capacity(synth_small):
    unit = synth_small.units[0]
    alloc = SiteAllocation(unit_retirement={unit.id: unit.capacity + 1e6})
    with pytest.raises(ValueError, match="negative resulting capacity"):
        build_portfolio(synth_small, alloc)


# -- end-to-end translation -----------------------------------------------------------


def _solved(case):
    from gridres.expansion import build_expansion_lp, extract_solution
    from gridres.lp import solve_simplex

    lp, ix = build_expansion_lp(case)
    sol = solve_simplex(lp)
    assert sol.is_optimal
    return extract_solution(case, ix, sol)


def test_identity_translation_matches_phase1_exactly(synth_small):
    sol = _solved(synth_small)
    coarse = aggregate_spatial(synth_small, RegionPartition.identity(synth_small))
    alloc, portfolio = translate_solution(sol, coarse, synth_small)
    for cid, mw in sol.vre_new.items():
        assert portfolio.vre_new[cid] == pytest.approx(mw, abs=1e-9)
    for cid, mw in sol.thermal_new.items():
        assert portfolio.thermal_new[cid] == pytest.approx(mw, abs=1e-9)
    for cid, mw in sol.thermal_retired.items():
        assert portfolio.thermal_retired[cid] == pytest.approx(mw, abs=1e-9)
    for sid, mw in sol.storage_new_power.items():
        assert portfolio.storage_new_power[sid] == pytest.approx(mw, abs=1e-9)
    for l in synth_small.interregional_lines:
        want = l.capacity + sol.line_expansion.get(l.id, 0.0)
        assert portfolio.line_capacity[l.id] == pytest.approx(want, abs=1e-9)
    assert portfolio.case is synth_small  # no templates needed on the identity path


def test_merged_translation_conserves_every_total(synth_small):
    part = RegionPartition.from_mapping({"R01": "all", "R02": "all"})
    coarse = aggregate_spatial(synth_small, part)
    sol = _solved(coarse)
    alloc, portfolio = translate_solution(sol, coarse, synth_small)
    assert sum(portfolio.vre_new.values()) == pytest.approx(
        sum(sol.vre_new.values()), abs=1e-9
    )
    assert sum(portfolio.thermal_new.values()) == pytest.approx(
        sum(sol.thermal_new.values()), abs=1e-9
    )
    assert sum(portfolio.thermal_retired.values()) == pytest.approx(
        sum(sol.thermal_retired.values()), abs=1e-9
    )
    assert sum(portfolio.storage_new_power.values()) == pytest.approx(
        sum(sol.storage_new_power.values()), abs=1e-9
    )
    assert sum(portfolio.storage_new_energy.values()) == pytest.approx(
        sum(sol.storage_new_energy.values()), abs=1e-9
    )
    # every fine cluster is present even when untouched
    assert set(portfolio.vre_new) >= {c.id for c in synth_small.vre_clusters}
    require_valid(portfolio.case)


def test_investment_into_a_bare_region_creates_a_template():
    uA = make_unit("uA", "A", "gA", 5.0)
    fine = make_case(
        [
            Region(id="A", urban_population=0, reserve_margin=0.0, demand=series([0.0, 0.0])),
            Region(id="B", urban_population=0, reserve_margin=0.0, demand=series([6.0, 6.0])),
        ],
        [make_thermal_cluster("gA", "A", [uA], max_new=50.0)],
        units=[uA],
    )
    coarse = aggregate_spatial(fine, RegionPartition.from_mapping({"A": "W", "B": "W"}))
    sol = investments(thermal_new={"W_gas": 10.0})
    alloc, portfolio = translate_solution(sol, coarse, fine)
    # all demand sits in B, so the full 10 MW lands there on a fresh cluster
    assert alloc.thermal_new == {"B_gas_tpl": 10.0}
    assert "B_gas_tpl" in {c.id for c in portfolio.case.clusters}
    tpl = portfolio.case.cluster_by_id["B_gas_tpl"]
    assert tpl.existing_capacity == 0.0
    assert tpl.region == "B"
    assert portfolio.thermal_new["B_gas_tpl"] == 10.0


def test_allocation_file_round_trip(tmp_path, synth_small):
    part = RegionPartition.from_mapping({"R01": "all", "R02": "all"})
    coarse = aggregate_spatial(synth_small, part)
    sol = _solved(coarse)
    alloc, _ = translate_solution(sol, coarse, synth_small)
    path = str(tmp_path / "allocation.csv")
    write_allocation(alloc, path)
    back = read_allocation(path)
    assert back.site_investment == alloc.site_investment
    assert back.unit_retirement == alloc.unit_retirement
    assert back.thermal_new == alloc.thermal_new
    assert back.storage_power == alloc.storage_power
    assert back.storage_energy == alloc.storage_energy
    assert back.line_capacity == alloc.line_capacity
    # clusters that invested nothing carry no provenance rows on disk
    assert back.provenance == {k: v for k, v in alloc.provenance.items() if v}


def test_investment_vector_parses_named_values():
    v = InvestmentVector.from_named_values(
        {"xv[v1]": 1.5, "xg[g1]": 2.0, "ret[g1]": 0.5, "xp[b1]": 1.0, "xe[b1]": 4.0, "xl[l1]": 2.0}
    )
    assert v.vre_new == {"v1": 1.5}
    assert v.thermal_new == {"g1": 2.0}
    assert v.thermal_retired == {"g1": 0.5}
    assert v.storage_new_power == {"b1": 1.0}
    assert v.storage_new_energy == {"b1": 4.0}
    assert v.line_expansion == {"l1": 2.0}
    with pytest.raises(ValueError, match="unrecognized"):
        InvestmentVector.from_named_values({"zz[q]": 1.0})
    with pytest.raises(ValueError, match="unrecognized"):
        InvestmentVector.from_named_values({"xv": 1.0})
