"""Grouping VRE sites into investable clusters by LCOE and CF bins.

Shared by the synthetic generator (to build fine cases) and by spatial
aggregation (to re-bin merged regions), so an identity aggregation
reproduces the fine clusters bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import CaseError, ResourceCluster, Site, site_fixed_cost, vre_aggregate_profile, weighted_mean


@dataclass(frozen=True)
class BinSpec:
    lcoe_max: float  # $/MWh admission threshold
    n_lcoe: int
    n_cf: int


# Default bin grid per technology: 5x3 for land techs under 200 $/MWh,
# 3x2 for offshore under 300 $/MWh.
DEFAULT_BINNING: dict[str, BinSpec] = {
    "solar": BinSpec(200.0, 5, 3),
    "onshore_wind": BinSpec(200.0, 5, 3),
    "offshore_fixed": BinSpec(300.0, 3, 2),
    "offshore_floating": BinSpec(300.0, 3, 2),
}


def _capacity_balanced_bins(sites: list[Site], key, n_bins: int) -> dict[str, int]:
    """Assign each site a bin index so bins hold roughly equal capacity.

    Sites are walked in (key, id) order; a site's bin is determined by the
    capacity accumulated before it, which is deterministic and free of
    floating-point edge ambiguity.
    """
    ordered = sorted(sites, key=lambda s: (key(s), s.id))
    total = sum(s.capacity_limit for s in ordered)
    width = total / n_bins
    out: dict[str, int] = {}
    cum_before = 0.0
    for s in ordered:
        out[s.id] = min(n_bins - 1, int(cum_before / width)) if width > 0 else 0
        cum_before += s.capacity_limit
    return out


def bin_vre_sites(
    region_id: str,
    sites: list[Site],
    hours: int,
    binning: dict[str, BinSpec] | None = None,
    existing_by_tech: dict[str, float] | None = None,
) -> list[ResourceCluster]:
    """Build VRE clusters for one region from its member sites.

    Cluster ids are ``{region}_{tech}_L{i}C{j}``; empty bins are dropped.
    Existing capacity per tech (if any) is spread over that tech's bins in
    proportion to bin capacity, with the residual pinned to the last bin so
    totals are conserved exactly.
    """
    binning = binning or DEFAULT_BINNING
    existing_by_tech = existing_by_tech or {}
    clusters: list[ResourceCluster] = []
    techs = sorted({s.tech for s in sites})
    for tech in techs:
        spec = binning.get(tech)
        if spec is None:
            raise CaseError(f"no bin spec for tech {tech}")
        tech_sites = [s for s in sites if s.tech == tech]
        for s in tech_sites:
            if s.lcoe > spec.lcoe_max:
                raise CaseError(
                    f"site {s.id}: lcoe {s.lcoe} exceeds the {spec.lcoe_max} $/MWh filter for {tech}"
                )
        lcoe_bin = _capacity_balanced_bins(tech_sites, lambda s: s.lcoe, spec.n_lcoe)
        cf_bin = _capacity_balanced_bins(tech_sites, lambda s: s.annual_cf, spec.n_cf)

        groups: dict[tuple[int, int], list[Site]] = {}
        for s in tech_sites:
            groups.setdefault((lcoe_bin[s.id], cf_bin[s.id]), []).append(s)

        tech_total = sum(s.capacity_limit for s in tech_sites)
        existing_total = existing_by_tech.get(tech, 0.0)
        keys = sorted(groups)
        assigned = 0.0
        for n, key in enumerate(keys):
            members = sorted(groups[key], key=lambda s: s.id)
            cap = sum(s.capacity_limit for s in members)
            if n == len(keys) - 1:
                existing = existing_total - assigned
            else:
                existing = existing_total * cap / tech_total if tech_total else 0.0
                assigned += existing
            clusters.append(
                ResourceCluster(
                    id=f"{region_id}_{tech}_L{key[0]}C{key[1]}",
                    region=region_id,
                    tech=tech,
                    members=tuple(s.id for s in members),
                    existing_capacity=existing,
                    max_new_capacity=cap,
                    fixed_cost=weighted_mean(
                        [site_fixed_cost(s, hours) for s in members],
                        [s.capacity_limit for s in members],
                    ),
                    fom_cost=0.0,
                    aggregate_profile=vre_aggregate_profile(members),
                )
            )
    return sorted(clusters, key=lambda c: c.id)
