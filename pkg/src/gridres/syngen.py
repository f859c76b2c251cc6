"""Deterministic synthetic test systems on a one-dimensional line topology.

Regions sit on a line; neighbors share an interregional corridor. Demand and
VRE availability follow seasonal plus diurnal sinusoids with additive noise
whose inter-region correlation decays exponentially with distance over
``spatial_correlation_length``. Per-region character enters only through
affine scaling and through the noise, so in the long-correlation limit the
profiles of any two regions are perfectly correlated.

All randomness flows through the portable generator in ``prng`` via named
substreams, in a fixed documented order, so a seed pins every byte of the
output case. Costs are quoted per case year: a config covering ``hours``
hours scales real annualized figures by hours / 8760.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .binning import DEFAULT_BINNING, bin_vre_sites
from .model import (
    Region,
    Series,
    Site,
    StorageCluster,
    SystemCase,
    ThermalUnit,
    TransmissionLine,
    derive_thermal_params,
    require_valid,
    ResourceCluster,
    VRE_TECHS,
)
from .prng import Rng

PATHWAY_CARBON_FEE = {"BAU": 0.0, "CP": 200.0}  # $/tCO2


@dataclass(frozen=True)
class SynthConfig:
    n_regions: int = 6
    periods: int = 8  # weeks at period_length 168, or days at 24
    period_length: int = 168
    sites_per_region: dict = field(
        default_factory=lambda: {"solar": 3, "onshore_wind": 3}
    )
    units_per_plant: int = 3
    demand_peak_range: tuple[float, float] = (600.0, 1400.0)  # MW
    spatial_correlation_length: float = 2.0  # in inter-region hops
    profile_noise: float = 0.08
    demand_noise: float = 0.04
    line_capacity_frac: float = 0.28  # of the smaller neighbor's demand base
    pathway: str = "CP"
    nse_cost: float = 2000.0  # $/MWh

    @property
    def hours(self) -> int:
        return self.periods * self.period_length


def _region_ids(n: int) -> list[str]:
    width = max(2, len(str(n)))
    return [f"R{i + 1:0{width}d}" for i in range(n)]


def _correlated_noise(rng: Rng, n_regions: int, hours: int, corr_len: float) -> np.ndarray:
    """(hours, regions) standard normals with exp(-distance/corr_len) correlation."""
    idx = np.arange(n_regions, dtype=float)
    if corr_len <= 0:
        cov = np.eye(n_regions)
    else:
        cov = np.exp(-np.abs(idx[:, None] - idx[None, :]) / corr_len)
    cov = cov + 1e-9 * np.eye(n_regions)  # keeps Cholesky alive as corr_len -> inf
    chol = np.linalg.cholesky(cov)
    z = rng.normals(hours * n_regions).reshape(hours, n_regions)
    return z @ chol.T


def _solar_base(hours: int, plen: int) -> np.ndarray:
    t = np.arange(hours)
    hod = t % 24
    diurnal = np.clip(np.sin(math.pi * (hod - 6.0) / 12.0), 0.0, None)
    seasonal = 1.0 - 0.25 * np.cos(2.0 * math.pi * t / hours)
    return 0.75 * diurnal * seasonal


def _wind_base(hours: int, plen: int, offshore: bool) -> np.ndarray:
    t = np.arange(hours)
    hod = t % 24
    mean = 0.48 if offshore else 0.36
    seasonal = 0.16 * np.sin(2.0 * math.pi * t / hours + 0.9)
    synoptic = 0.14 * np.sin(2.0 * math.pi * t / (3.5 * 24.0) + 0.4)
    diurnal = (0.04 if offshore else 0.08) * np.sin(2.0 * math.pi * (hod - 14.0) / 24.0)
    return mean + seasonal + synoptic + diurnal


def _tech_base(tech: str, hours: int, plen: int) -> np.ndarray:
    if tech == "solar":
        return _solar_base(hours, plen)
    return _wind_base(hours, plen, offshore=tech.startswith("offshore"))


def generate(cfg: SynthConfig, seed: int) -> SystemCase:
    """Build a complete, validated fine-resolution case from a seed."""
    if cfg.pathway not in PATHWAY_CARBON_FEE:
        raise ValueError(f"unknown pathway {cfg.pathway!r}")
    n = cfg.n_regions
    hours = cfg.hours
    scale = hours / 8760.0  # costs quoted per case year
    rids = _region_ids(n)
    root = Rng(seed)

    # -- regions and demand ------------------------------------------------
    rng_reg = root.derive("regions")
    pops = [int(round(10 ** rng_reg.uniform(5.3, 6.6))) for _ in range(n)]
    if max(pops) < 1_000_000:
        pops[pops.index(max(pops))] = 1_500_000
    margins = [round(rng_reg.uniform(0.10, 0.18), 4) for _ in range(n)]

    rng_dem = root.derive("demand")
    bases = [rng_dem.uniform(*cfg.demand_peak_range) for _ in range(n)]
    phases = [rng_dem.uniform(-3.0, 3.0) for _ in range(n)]
    season_phase = [rng_dem.uniform(0.0, 2.0 * math.pi) for _ in range(n)]
    dem_noise = _correlated_noise(rng_dem, n, hours, cfg.spatial_correlation_length)

    t = np.arange(hours)
    hod = t % 24
    regions = []
    for i, rid in enumerate(rids):
        diurnal = 0.18 * np.sin(2.0 * math.pi * (hod - 9.0 + phases[i]) / 24.0)
        seasonal = 0.08 * np.sin(2.0 * math.pi * t / hours + season_phase[i])
        shape = 0.72 + diurnal + seasonal + cfg.demand_noise * dem_noise[:, i]
        mw = np.maximum(bases[i] * shape, 0.02 * bases[i])
        regions.append(
            Region(rid, pops[i], margins[i], Series(mw, cfg.period_length))
        )

    # -- VRE sites ----------------------------------------------------------
    sites: list[Site] = []
    lines: list[TransmissionLine] = []
    for tech in VRE_TECHS:
        count = int(cfg.sites_per_region.get(tech, 0))
        if count == 0:
            continue
        rng_t = root.derive(f"profile_{tech}")
        alphas = [rng_t.uniform(0.85, 1.08) for _ in range(n)]
        offsets = [rng_t.uniform(-0.03, 0.08) for _ in range(n)]
        noise = _correlated_noise(rng_t, n, hours, cfg.spatial_correlation_length)
        base = _tech_base(tech, hours, cfg.period_length)
        lcoe_cap = DEFAULT_BINNING[tech].lcoe_max
        rng_s = root.derive(f"sites_{tech}")
        for i, rid in enumerate(rids):
            region_profile = np.clip(
                alphas[i] * base + offsets[i] + cfg.profile_noise * noise[:, i], 0.0, 1.0
            )
            lcoe = rng_s.uniform(26.0, 52.0) * (1.6 if tech.startswith("offshore") else 1.0)
            for k in range(count):
                sid = f"{rid}_{tech}_s{k:02d}"
                cap = round(rng_s.uniform(80.0, 350.0), 1)
                profile = np.clip(region_profile * (0.97 + 0.06 * rng_s.u01()), 0.0, 1.0)
                lcoe = min(lcoe + rng_s.uniform(2.0, 14.0), 0.95 * lcoe_cap)
                spur_cost = rng_s.uniform(3000.0, 9000.0) * scale
                sites.append(
                    Site(
                        id=sid,
                        fine_region=rid,
                        tech=tech,
                        capacity_limit=cap,
                        lcoe=round(lcoe, 3),
                        annual_cf=float(np.mean(profile)),
                        profile=Series(profile, cfg.period_length),
                        spur_cost=round(spur_cost, 2),
                        spur_capacity=cap,
                    )
                )
                # at fine resolution every region is its own urban sink
                lines.append(
                    TransmissionLine(
                        id=f"spur_{sid}",
                        kind="spur",
                        endpoints=(rid,),
                        fine_endpoints=(rid, rid),
                        capacity=cap,
                        expansion_cost=0.0,
                        max_expansion=0.0,
                    )
                )

    # -- thermal fleet -------------------------------------------------------
    units: list[ThermalUnit] = []
    clusters: list[ResourceCluster] = []
    rng_th = root.derive("thermal")
    fleet_specs = (
        # tech, existing frac of base, max_new frac, capex/yr, fom/yr, hr0, hr step, units
        ("gas", (0.38, 0.55), 2.5, 95_000.0, 18_000.0, (6.4, 7.0), 0.12, cfg.units_per_plant),
        ("coal", (0.25, 0.45), 0.0, 0.0, 42_000.0, (9.4, 10.2), 0.22, 2),
    )
    for i, rid in enumerate(rids):
        for tech, exist_frac, new_frac, capex, fom, hr_range, hr_step, n_units in fleet_specs:
            existing = round(rng_th.uniform(*exist_frac) * bases[i], 1)
            hr_base = rng_th.uniform(*hr_range)
            weights = [1.0 + 0.3 * rng_th.u01() for _ in range(n_units)]
            wsum = sum(weights)
            caps = [round(existing * w / wsum, 3) for w in weights[:-1]]
            caps.append(round(existing - sum(caps), 3))
            plant = f"{rid}_{tech}"
            if tech == "gas":
                min_out, ramp = rng_th.uniform(0.28, 0.38), rng_th.uniform(0.5, 0.8)
                start, ef = rng_th.uniform(55.0, 95.0), 0.059
                fuel, vom = rng_th.uniform(3.0, 4.4), rng_th.uniform(1.5, 2.5)
            else:
                min_out, ramp = rng_th.uniform(0.40, 0.50), rng_th.uniform(0.30, 0.45)
                start, ef = rng_th.uniform(100.0, 150.0), 0.095
                fuel, vom = rng_th.uniform(1.6, 2.1), rng_th.uniform(3.2, 4.4)
            plant_units = [
                ThermalUnit(
                    id=f"{plant}_u{k}",
                    fine_region=rid,
                    plant=plant,
                    capacity=caps[k],
                    heat_rate=round(hr_base * (1.0 + hr_step * k), 4),
                    min_output=round(min_out, 4),
                    ramp_rate=round(ramp, 4),
                    start_cost=round(start, 2),
                    emission_factor=ef,
                    fuel_cost=round(fuel, 3),
                    vom=round(vom, 3),
                )
                for k in range(n_units)
            ]
            units.extend(plant_units)
            clusters.append(
                ResourceCluster(
                    id=plant,
                    region=rid,
                    tech=tech,
                    members=tuple(u.id for u in plant_units),
                    existing_capacity=existing,
                    max_new_capacity=round(new_frac * bases[i], 1),
                    fixed_cost=round(capex * scale * (1.0 + 0.1 * rng_th.u01()), 2),
                    fom_cost=round(fom * scale, 2),
                    thermal=derive_thermal_params(plant_units),
                )
            )

    # -- storage --------------------------------------------------------------
    rng_st = root.derive("storage")
    storage = []
    for i, rid in enumerate(rids):
        power = round(rng_st.uniform(0.0, 40.0), 1)
        storage.append(
            StorageCluster(
                id=f"{rid}_storage",
                region=rid,
                power_cost=round(21_000.0 * scale * (1.0 + 0.15 * rng_st.u01()), 2),
                energy_cost=round(11_000.0 * scale * (1.0 + 0.15 * rng_st.u01()), 2),
                efficiency_rt=0.85,
                existing_power=power,
                existing_energy=round(4.0 * power, 1),
            )
        )

    # -- transmission -----------------------------------------------------------
    rng_ln = root.derive("lines")
    adjacent_cap = {rid: 0.0 for rid in rids}
    for i in range(n - 1):
        a, b = rids[i], rids[i + 1]
        cap = round(cfg.line_capacity_frac * rng_ln.uniform(0.75, 1.25) * min(bases[i], bases[i + 1]), 1)
        adjacent_cap[a] += cap
        adjacent_cap[b] += cap
        lines.append(
            TransmissionLine(
                id=f"{a}--{b}",
                kind="interregional",
                endpoints=(a, b),
                fine_endpoints=(a, b),
                capacity=cap,
                expansion_cost=round(11_000.0 * scale * (1.0 + 0.3 * rng_ln.u01()), 2),
                max_expansion=round(1.5 * cap, 1),
            )
        )
    for rid in rids:
        # backbone sized at 1.0x the interregional capacity touching the region
        lines.append(
            TransmissionLine(
                id=f"bb_{rid}",
                kind="backbone",
                endpoints=(rid,),
                fine_endpoints=(rid, rid),
                capacity=round(adjacent_cap[rid], 1),
                expansion_cost=0.0,
                max_expansion=0.0,
            )
        )

    # -- VRE clusters from the shared binning rule --------------------------------
    for rid in rids:
        region_sites = [s for s in sites if s.fine_region == rid]
        if region_sites:
            clusters.extend(bin_vre_sites(rid, region_sites, hours))

    case = SystemCase(
        regions=tuple(regions),
        sites=tuple(sites),
        units=tuple(units),
        clusters=tuple(clusters),
        storage=tuple(storage),
        lines=tuple(lines),
        nse_cost=cfg.nse_cost,
        carbon_fee=PATHWAY_CARBON_FEE[cfg.pathway],
    )
    return require_valid(case)
