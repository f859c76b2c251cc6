"""Scoring of a resolution combo against the high-resolution baseline.

Site-choice overlap (SCO) per tech is the capacity-weighted Jaccard
overlap of invested MW per site, in percent. The capacity and regional
error metrics follow the sqrt-of-sum-over-count form exactly as stated
(sqrt of summed squared differences, divided by entity count); the
conventional RMSE rides along in secondary fields for sanity but the
verbatim value is the contract.

Profit per region nets energy revenue at zonal prices against fuel, VOM,
startup, and carbon-fee outlays of that region's generators, plus storage
arbitrage earned there. Fixed costs are excluded and reported separately.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .expansion import ExpansionSolution
from .model import SystemCase
from .translate import SiteAllocation


def sco(a: SiteAllocation, b: SiteAllocation, tech: str, case: SystemCase) -> float:
    lo = hi = 0.0
    for s in case.sites:
        if s.tech != tech:
            continue
        av = a.site_investment.get(s.id, 0.0)
        bv = b.site_investment.get(s.id, 0.0)
        lo += min(av, bv)
        hi += max(av, bv)
    if hi == 0.0:
        return 100.0
    # divide first so identical allocations give exactly 100.0
    return 100.0 * (lo / hi)


def _check_universe(a: dict, b: dict, what: str) -> None:
    if set(a) != set(b):
        only_a = sorted(set(a) - set(b))[:3]
        only_b = sorted(set(b) - set(a))[:3]
        raise ValueError(f"mismatched {what} universes: {only_a} vs {only_b}")


def mse_lines(case_lines: dict, hrb_lines: dict) -> float:
    """sqrt(sum of squared GW differences) / line count."""
    _check_universe(case_lines, hrb_lines, "line")
    if not hrb_lines:
        return 0.0
    sq = sum(((case_lines[k] - hrb_lines[k]) / 1000.0) ** 2 for k in hrb_lines)
    return float(np.sqrt(sq)) / len(hrb_lines)


def mse_regional(values: dict, hrb_values: dict) -> float:
    """sqrt(sum of squared differences) / region count."""
    _check_universe(values, hrb_values, "region")
    if not hrb_values:
        return 0.0
    sq = sum((values[k] - hrb_values[k]) ** 2 for k in hrb_values)
    return float(np.sqrt(sq)) / len(hrb_values)


def rmse(values: dict, hrb_values: dict) -> float:
    _check_universe(values, hrb_values, "entity")
    if not hrb_values:
        return 0.0
    sq = [(values[k] - hrb_values[k]) ** 2 for k in hrb_values]
    return float(np.sqrt(np.mean(sq)))


@dataclass
class Financials:
    variable_cost: float  # fuel + vom + startup
    nse_cost: float
    abatement_fee: float
    emissions_by_region: dict
    nse_by_region: dict
    profit_by_region: dict
    revenue_by_region: dict
    price_by_region_hour: dict  # region -> 24 hour-of-day means


def financials(sol: ExpansionSolution, case: SystemCase) -> Financials:
    w = sol.hour_weight
    region_of = {c.id: c.region for c in case.clusters}

    nse_by_region = {r.id: float((sol.nse[r.id] * w).sum()) for r in case.regions}
    emissions = {r.id: 0.0 for r in case.regions}
    profit = {r.id: 0.0 for r in case.regions}
    revenue = {r.id: 0.0 for r in case.regions}

    for c in case.clusters:
        rid = region_of[c.id]
        energy = sol.dispatch[c.id] * w
        rev = float((sol.prices[rid] * energy).sum())
        revenue[rid] += rev
        profit[rid] += rev
        if not c.is_vre:
            th = c.thermal
            mwh = float(energy.sum())
            emissions[rid] += mwh * th.heat_rate * th.emission_factor
            profit[rid] -= mwh * (th.fuel_cost * th.heat_rate + th.vom)
            profit[rid] -= case.carbon_fee * mwh * th.heat_rate * th.emission_factor
            if c.id in sol.startups:
                profit[rid] -= float((sol.startups[c.id] * w).sum()) * th.start_cost
    for s in case.storage:
        arb = float((sol.prices[s.region] * (sol.discharge[s.id] - sol.charge[s.id]) * w).sum())
        profit[s.region] += arb
        revenue[s.region] += arb

    hours = np.asarray(sol.hours)
    hod = hours % 24
    price_hod = {}
    for r in case.regions:
        p = sol.prices[r.id]
        means = np.zeros(24)
        for h in range(24):
            mask = hod == h
            means[h] = float(p[mask].mean()) if mask.any() else 0.0
        price_hod[r.id] = tuple(means)

    total_nse_cost = case.nse_cost * float(sum((v * w).sum() for v in sol.nse.values()))
    fee = case.carbon_fee * float(sum(emissions.values()))
    return Financials(
        variable_cost=sol.variable_cost,
        nse_cost=total_nse_cost,
        abatement_fee=fee,
        emissions_by_region=emissions,
        nse_by_region=nse_by_region,
        profit_by_region=profit,
        revenue_by_region=revenue,
        price_by_region_hour=price_hod,
    )


def cost_recovery(sol: ExpansionSolution, case: SystemCase) -> dict:
    """Adding-up identity at zonal prices.

    Load payments minus the shed-load penalty must equal generator energy
    revenue plus storage arbitrage plus congestion rent. Spilled energy
    carries a zero price so it drops out. Returns both sides and the parts;
    callers assert the match.
    """
    w = sol.hour_weight
    region_of = {c.id: c.region for c in case.clusters}

    hours = np.asarray(sol.hours)
    load_payment = 0.0
    nse_penalty = 0.0
    for r in case.regions:
        p = sol.prices[r.id]
        dem = r.demand.values[hours]
        load_payment += float((p * dem * w).sum())
        nse_penalty += float((p * sol.nse[r.id] * w).sum())

    gen_revenue = 0.0
    for c in case.clusters:
        p = sol.prices[region_of[c.id]]
        gen_revenue += float((p * sol.dispatch[c.id] * w).sum())

    arbitrage = 0.0
    for s in case.storage:
        p = sol.prices[s.region]
        arbitrage += float((p * (sol.discharge[s.id] - sol.charge[s.id]) * w).sum())

    congestion = 0.0
    for l in case.interregional_lines:
        a, b = l.endpoints
        f = sol.flow_net[l.id]
        congestion += float(((sol.prices[b] - sol.prices[a]) * f * w).sum())

    spill_value = 0.0
    for r in case.regions:
        spill_value += float((sol.prices[r.id] * sol.spill[r.id] * w).sum())

    return {
        "load_payment": load_payment,
        "nse_penalty": nse_penalty,
        "gen_revenue": gen_revenue,
        "storage_arbitrage": arbitrage,
        "congestion_rent": congestion,
        "spill_value": spill_value,
        "lhs": load_payment - nse_penalty,
        "rhs": gen_revenue + arbitrage + congestion,
    }


def phase_compare(expansion: ExpansionSolution, operations: ExpansionSolution,
                  coarse: SystemCase, fine: SystemCase) -> dict:
    """Per-tech (phase-1 weighted MWh, phase-2 MWh, delta), plus a
    "variable_cost" row carrying the cost comparison in dollars."""
    def by_tech(sol: ExpansionSolution, case: SystemCase) -> dict:
        out: dict = {}
        for c in case.clusters:
            mwh = float((sol.dispatch[c.id] * sol.hour_weight).sum())
            out[c.tech] = out.get(c.tech, 0.0) + mwh
        return out

    p1 = by_tech(expansion, coarse)
    p2 = by_tech(operations, fine)
    out = {}
    for tech in sorted(set(p1) | set(p2)):
        a, b = p1.get(tech, 0.0), p2.get(tech, 0.0)
        out[tech] = (a, b, b - a)
    a, b = expansion.variable_cost, operations.variable_cost
    out["variable_cost"] = (a, b, b - a)
    return out


@dataclass
class MetricsReport:
    combo: str
    sco_by_tech: dict  # tech -> percent
    mse_cap: float  # GW
    mse_profit: float  # $
    mse_emiss: float  # tCO2
    rmse_cap: float
    rmse_profit: float
    rmse_emiss: float
    total_cost: float
    fixed_cost: float
    variable_cost: float
    nse_cost: float
    abatement_fee: float
    nse_by_region: dict
    emissions_by_region: dict
    profit_by_region: dict
    price_by_region_hour: dict
    phase_delta: dict  # tech -> (phase1, phase2, delta)
    total_nse: float = 0.0
    total_emissions: float = 0.0

    def rows(self):
        """Long-format rows (combo, metric, key, value)."""
        out = []
        for tech in sorted(self.sco_by_tech):
            out.append((self.combo, "sco", tech, self.sco_by_tech[tech]))
        for name in ("mse_cap", "mse_profit", "mse_emiss", "rmse_cap",
                     "rmse_profit", "rmse_emiss", "total_cost", "fixed_cost",
                     "variable_cost", "nse_cost", "abatement_fee", "total_nse",
                     "total_emissions"):
            out.append((self.combo, name, "", getattr(self, name)))
        for rid in sorted(self.nse_by_region):
            out.append((self.combo, "nse", rid, self.nse_by_region[rid]))
        for rid in sorted(self.emissions_by_region):
            out.append((self.combo, "emissions", rid, self.emissions_by_region[rid]))
        for rid in sorted(self.profit_by_region):
            out.append((self.combo, "profit", rid, self.profit_by_region[rid]))
        for rid in sorted(self.price_by_region_hour):
            for h, v in enumerate(self.price_by_region_hour[rid]):
                out.append((self.combo, "price_hod", f"{rid}:{h:02d}", v))
        for tech in sorted(self.phase_delta):
            p1, p2, d = self.phase_delta[tech]
            out.append((self.combo, "phase1_mwh", tech, p1))
            out.append((self.combo, "phase2_mwh", tech, p2))
            out.append((self.combo, "phase_delta", tech, d))
        return out


def build_report(
    combo: str,
    expansion: ExpansionSolution,
    operations: ExpansionSolution,
    coarse: SystemCase,
    fine: SystemCase,
    allocation: SiteAllocation,
    hrb_allocation: SiteAllocation,
    hrb_operations: ExpansionSolution,
    line_capacity: dict,
    hrb_line_capacity: dict,
    ops_case: SystemCase | None = None,
    hrb_ops_case: SystemCase | None = None,
) -> MetricsReport:
    # the operations run may live on a case extended with template clusters
    ops_case = ops_case if ops_case is not None else fine
    hrb_ops_case = hrb_ops_case if hrb_ops_case is not None else fine
    fin = financials(operations, ops_case)
    hrb_fin = financials(hrb_operations, hrb_ops_case)

    techs = sorted({s.tech for s in fine.sites})
    sco_by_tech = {t: sco(allocation, hrb_allocation, t, fine) for t in techs}

    report = MetricsReport(
        combo=combo,
        sco_by_tech=sco_by_tech,
        mse_cap=mse_lines(line_capacity, hrb_line_capacity),
        mse_profit=mse_regional(fin.profit_by_region, hrb_fin.profit_by_region),
        mse_emiss=mse_regional(fin.emissions_by_region, hrb_fin.emissions_by_region),
        rmse_cap=rmse({k: v / 1000.0 for k, v in line_capacity.items()},
                      {k: v / 1000.0 for k, v in hrb_line_capacity.items()}),
        rmse_profit=rmse(fin.profit_by_region, hrb_fin.profit_by_region),
        rmse_emiss=rmse(fin.emissions_by_region, hrb_fin.emissions_by_region),
        total_cost=expansion.fixed_cost + fin.variable_cost + fin.nse_cost + fin.abatement_fee,
        fixed_cost=expansion.fixed_cost,
        variable_cost=fin.variable_cost,
        nse_cost=fin.nse_cost,
        abatement_fee=fin.abatement_fee,
        nse_by_region=fin.nse_by_region,
        emissions_by_region=fin.emissions_by_region,
        profit_by_region=fin.profit_by_region,
        price_by_region_hour=fin.price_by_region_hour,
        phase_delta=phase_compare(expansion, operations, coarse, ops_case),
        total_nse=float(sum(fin.nse_by_region.values())),
        total_emissions=float(sum(fin.emissions_by_region.values())),
    )
    return report


def write_report(reports, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("case", "metric", "key", "value"))
        for rep in reports:
            for combo, metric, key, value in rep.rows():
                w.writerow((combo, metric, key, repr(float(value)) if isinstance(value, float) else value))


def format_summary(reports) -> str:
    """Human-readable table of the headline numbers."""
    headers = ("case", "sco_solar", "sco_wind", "mse_cap_gw", "mse_profit",
               "mse_emiss", "total_cost", "nse_mwh", "emissions_t")
    rows = [headers]
    for r in reports:
        rows.append((
            r.combo,
            f"{r.sco_by_tech.get('solar', 100.0):.1f}",
            f"{r.sco_by_tech.get('onshore_wind', 100.0):.1f}",
            f"{r.mse_cap:.6g}",
            f"{r.mse_profit:.6g}",
            f"{r.mse_emiss:.6g}",
            f"{r.total_cost:.6g}",
            f"{r.total_nse:.6g}",
            f"{r.total_emissions:.6g}",
        ))
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(headers))]
    lines = []
    for row in rows:
        lines.append("  ".join(str(v).rjust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)
