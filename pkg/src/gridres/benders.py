"""Benders decomposition of the capacity-expansion LP.

Master: investment variables, reserve rows, and one nonnegative cost
variable per representative period. Subproblem p: the operations LP of
period p with every investment pinned to the master iterate via equal
bounds. Non-served energy keeps every subproblem feasible, so only
optimality cuts arise. The cut for period p at iterate x is

    theta_p >= v_p(x) + sum_j z_j (x_j^new - x_j)

where z_j is the reduced cost of pinned investment column j in the
subproblem optimum (its objective coefficient there is zero, so z_j is
the sensitivity of v_p to moving both bounds together).

Subproblem LPs are built once and re-pinned in place each iteration;
cuts are inserted sorted by period index so results do not depend on
completion order. An optional convex-combination step toward the
incumbent (stab_weight in [0, 1)) damps the master iterate; 0 is pure
Benders.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .expansion import (
    BuildOptions,
    ExpansionSolution,
    VarIndex,
    add_reserve_rows,
    build_lp,
    extract_solution,
    investment_entries,
)
from .lp import GE, LpBuilder, Solution, solve_simplex
from .model import SystemCase


@dataclass
class BendersResult:
    status: str  # "optimal" | "max_iter"
    objective: float  # best upper bound
    lower_bound: float
    gap: float
    iterations: int
    log: list = field(default_factory=list)  # (iteration, lb, ub, gap)
    solution: ExpansionSolution | None = None
    investment: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == "optimal"

    def log_lines(self) -> list:
        return [
            f"{it} {lb!r} {ub!r} {gap!r}" for it, lb, ub, gap in self.log
        ]


@dataclass
class _Cut:
    period: int
    value: float  # v_p(x)
    point: np.ndarray  # iterate the cut was generated at
    slope: np.ndarray  # reduced costs per investment variable


def _fixed_cost_of(case: SystemCase, inv: dict) -> float:
    total = 0.0
    for name, _kind, _eid, _lo, _hi, cost in investment_entries(case):
        total += cost * inv[name]
    for c in case.clusters:
        total += c.fom_cost * c.existing_capacity
    return total


def _solve_master(case: SystemCase, entries, cuts, reserve: bool):
    b = LpBuilder()
    ix = VarIndex()
    cols = {}
    for name, _kind, _eid, lo, hi, cost in entries:
        cols[name] = b.var(name, lo, hi, cost)
        ix.inv[name] = cols[name]
        ix.inv_order.append(name)
    for c in case.clusters:
        b.obj_offset += c.fom_cost * c.existing_capacity
    theta = {p: b.var(f"theta[{p}]", 0.0, np.inf, 1.0) for p in range(case.n_periods)}
    if reserve:
        add_reserve_rows(case, b, ix)
    order = [name for name, *_ in entries]
    for i, cut in enumerate(cuts):
        terms = [(theta[cut.period], 1.0)]
        rhs = cut.value
        for j, name in enumerate(order):
            z = cut.slope[j]
            if z != 0.0:
                terms.append((cols[name], -z))
                rhs -= z * cut.point[j]
        b.row(f"cut[{i}]", GE, rhs, terms)
    sol = solve_simplex(b.build())
    if not sol.is_optimal:
        raise RuntimeError(f"master problem {sol.status}")
    x = np.array([sol.x[cols[name]] for name in order])
    return sol.objective, x


def _pin(lp, inv_cols, values: np.ndarray) -> None:
    for j, col in enumerate(inv_cols):
        lp.lo[col] = values[j]
        lp.hi[col] = values[j]


def _assemble(case: SystemCase, subs, best) -> ExpansionSolution:
    """Splice per-period extractions into one chronological solution."""
    parts = [extract_solution(case, ix, sol) for (_lp, ix), sol in zip(subs, best)]
    first = parts[0]

    def cat(getter):
        return {key: np.concatenate([getter(p)[key] for p in parts]) for key in getter(first)}

    variable = sum(p.variable_cost for p in parts)
    nse_cost_total = sum(p.nse_cost_total for p in parts)
    fee = sum(p.carbon_fee_cost for p in parts)
    emissions = {
        cid: sum(p.emissions_by_cluster[cid] for p in parts)
        for cid in first.emissions_by_cluster
    }
    fixed = first.fixed_cost  # pinned investments: identical in every part
    return ExpansionSolution(
        objective=fixed + variable + nse_cost_total + fee,
        fixed_cost=fixed,
        variable_cost=variable,
        nse_cost_total=nse_cost_total,
        carbon_fee_cost=fee,
        vre_new=first.vre_new,
        thermal_new=first.thermal_new,
        thermal_retired=first.thermal_retired,
        storage_new_power=first.storage_new_power,
        storage_new_energy=first.storage_new_energy,
        line_expansion=first.line_expansion,
        dispatch=cat(lambda p: p.dispatch),
        startups=cat(lambda p: p.startups),
        charge=cat(lambda p: p.charge),
        discharge=cat(lambda p: p.discharge),
        soc=cat(lambda p: p.soc),
        flow_net=cat(lambda p: p.flow_net),
        nse=cat(lambda p: p.nse),
        spill=cat(lambda p: p.spill),
        prices=cat(lambda p: p.prices),
        emissions_by_cluster=emissions,
        hours=[h for p in parts for h in p.hours],
        hour_weight=np.concatenate([p.hour_weight for p in parts]),
    )


def solve_benders(
    case: SystemCase,
    uc: str | None = None,
    reserve: bool = True,
    gap_tol: float = 1e-4,
    max_iter: int = 200,
    stab_weight: float = 0.0,
    sub_jobs: int = 1,
) -> BendersResult:
    if not 0.0 <= stab_weight < 1.0:
        raise ValueError("stab_weight must be in [0, 1)")
    if sub_jobs < 1:
        raise ValueError("sub_jobs must be >= 1")
    uc = uc or case.uc_mode
    entries = investment_entries(case)
    order = [name for name, *_ in entries]

    subs = []
    for p in range(case.n_periods):
        opts = BuildOptions(
            uc=uc,
            reserve=False,
            periods=(p,),
            fix={name: 0.0 for name in order},
            include_investment_cost=False,
        )
        lp, ix = build_lp(case, opts)
        subs.append((lp, ix))
    inv_cols = [subs[0][1].inv[name] for name in order]

    cuts: list[_Cut] = []
    best_ub = np.inf
    best_x = None
    best_sols: list[Solution] | None = None
    log = []
    status = "max_iter"
    lower = -np.inf
    gap = np.inf

    for it in range(1, max_iter + 1):
        lower, x_master = _solve_master(case, entries, cuts, reserve)
        trial = x_master if best_x is None else (1.0 - stab_weight) * x_master + stab_weight * best_x

        for p in range(case.n_periods):
            _pin(subs[p][0], inv_cols, trial)
        if sub_jobs > 1:
            # each subproblem owns its LP object; solves are independent
            with ThreadPoolExecutor(max_workers=sub_jobs) as pool:
                sols = list(pool.map(lambda s: solve_simplex(s[0]), subs))
        else:
            sols = [solve_simplex(lp) for lp, _ix in subs]
        for p, sol in enumerate(sols):
            if not sol.is_optimal:
                raise RuntimeError(f"subproblem {p} {sol.status}")
        ops_total = sum(s.objective for s in sols)

        ub_trial = _fixed_cost_of(case, dict(zip(order, trial))) + ops_total
        if ub_trial < best_ub:
            best_ub = ub_trial
            best_x = trial.copy()
            best_sols = sols
        gap = (best_ub - lower) / max(1.0, abs(best_ub))
        log.append((it, lower, best_ub, gap))
        if gap <= gap_tol:
            status = "optimal"
            break
        for p in range(case.n_periods):
            slope = np.array([sols[p].reduced_costs[col] for col in inv_cols])
            cuts.append(_Cut(period=p, value=sols[p].objective, point=trial.copy(), slope=slope))

    for p in range(case.n_periods):  # re-pin at the incumbent before extraction
        _pin(subs[p][0], inv_cols, best_x)
    solution = _assemble(case, subs, best_sols)
    return BendersResult(
        status=status,
        objective=best_ub,
        lower_bound=lower,
        gap=gap,
        iterations=len(log),
        log=log,
        solution=solution,
        investment=dict(zip(order, (float(v) for v in best_x))),
    )
