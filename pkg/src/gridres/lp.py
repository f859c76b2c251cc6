"""Sparse linear programs and the simplex solve behind every optimization.

The solver contract: minimize obj over bounded variables subject to rows
with senses <=, =, >=. Solutions carry row duals in the
``dual = d(objective)/d(rhs)`` convention (so a binding demand-balance
equality prices energy directly) plus reduced costs ``z = c - A^T y``.

Optimal solutions are KKT-checked before being returned:

    primal  max constraint/bound violation      <= 1e-7 * (1 + ||rhs||inf)
    dual    max reduced-cost sign violation     <= 1e-7 * (1 + ||c||inf)
    compl   relative duality gap                <= 1e-6

The backend is HiGHS dual simplex via scipy, which is deterministic for a
fixed input and returns basic solutions (exact complementarity up to
round-off). Numerical breakdown surfaces as SolverNumericsError, never as a
silently wrong Solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

LE, EQ, GE = "<=", "==", ">="

PRIMAL_TOL = 1e-7
DUAL_TOL = 1e-7
COMPL_TOL = 1e-6


class SolverNumericsError(RuntimeError):
    """The backend failed to produce a trustworthy solution."""


@dataclass
class LinearProgram:
    obj: np.ndarray  # (n,)
    lo: np.ndarray  # (n,)
    hi: np.ndarray  # (n,), np.inf allowed
    senses: list[str]
    rhs: np.ndarray  # (m,)
    a_matrix: sp.csr_matrix  # (m, n)
    obj_offset: float = 0.0
    col_names: list[str] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return int(self.obj.size)

    @property
    def n_rows(self) -> int:
        return int(self.rhs.size)

    def dump(self, path: str) -> None:
        """Plain-text sparse dump: an objective section (index coefficient),
        a bounds section (index lo hi), a rows section (index sense rhs) and
        a triplets section (row col coefficient)."""
        coo = self.a_matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"min {self.n_vars} {self.n_rows} offset {self.obj_offset!r}\n")
            fh.write("objective\n")
            for j in np.nonzero(self.obj)[0]:
                fh.write(f"{j} {self.obj[j]!r}\n")
            fh.write("bounds\n")
            for j in range(self.n_vars):
                fh.write(f"{j} {self.lo[j]!r} {self.hi[j]!r}\n")
            fh.write("rows\n")
            for i in range(self.n_rows):
                fh.write(f"{i} {self.senses[i]} {self.rhs[i]!r}\n")
            fh.write("triplets\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {v!r}\n")


class LpBuilder:
    """Incremental construction with named columns and rows."""

    def __init__(self):
        self._obj: list[float] = []
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._col_names: list[str] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self._ai: list[int] = []
        self._aj: list[int] = []
        self._av: list[float] = []
        self.obj_offset = 0.0

    def var(self, name: str, lo: float = 0.0, hi: float = np.inf, obj: float = 0.0) -> int:
        self._col_names.append(name)
        self._lo.append(lo)
        self._hi.append(hi)
        self._obj.append(obj)
        return len(self._col_names) - 1

    def row(self, name: str, sense: str, rhs: float, terms) -> int:
        if sense not in (LE, EQ, GE):
            raise ValueError(f"bad sense {sense!r}")
        i = len(self._senses)
        self._row_names.append(name)
        self._senses.append(sense)
        self._rhs.append(rhs)
        for j, coef in terms:
            if coef != 0.0:
                self._ai.append(i)
                self._aj.append(j)
                self._av.append(coef)
        return i

    def build(self) -> LinearProgram:
        n, m = len(self._col_names), len(self._senses)
        a = sp.coo_matrix(
            (self._av, (self._ai, self._aj)), shape=(m, n), dtype=float
        ).tocsr()
        a.sum_duplicates()
        return LinearProgram(
            obj=np.array(self._obj, dtype=float),
            lo=np.array(self._lo, dtype=float),
            hi=np.array(self._hi, dtype=float),
            senses=list(self._senses),
            rhs=np.array(self._rhs, dtype=float),
            a_matrix=a,
            obj_offset=self.obj_offset,
            col_names=self._col_names,
            row_names=self._row_names,
        )


@dataclass(frozen=True)
class KktResiduals:
    primal: float  # max violation, absolute
    dual: float  # max reduced-cost sign violation, absolute
    compl: float  # relative duality gap
    primal_scale: float
    dual_scale: float

    def ok(self) -> bool:
        return (
            self.primal <= PRIMAL_TOL * self.primal_scale
            and self.dual <= DUAL_TOL * self.dual_scale
            and self.compl <= COMPL_TOL
        )


@dataclass
class Solution:
    status: str  # optimal | infeasible | unbounded
    objective: float | None
    x: np.ndarray | None
    row_duals: np.ndarray | None  # d(objective)/d(rhs) per row
    reduced_costs: np.ndarray | None  # c - A^T y
    kkt: KktResiduals | None

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


_BOUND_ACTIVE_TOL = 1e-9


def kkt_residuals(lp: LinearProgram, x: np.ndarray, y: np.ndarray) -> KktResiduals:
    ax = lp.a_matrix @ x
    primal = 0.0
    for i, sense in enumerate(lp.senses):
        gap = ax[i] - lp.rhs[i]
        if sense == LE:
            primal = max(primal, gap)
        elif sense == GE:
            primal = max(primal, -gap)
        else:
            primal = max(primal, abs(gap))
    primal = max(
        primal,
        float(np.max(lp.lo - x, initial=0.0)),
        float(np.max(x - lp.hi, initial=0.0)),
    )

    z = lp.obj - lp.a_matrix.T @ y
    dual = 0.0
    for i, sense in enumerate(lp.senses):
        if sense == LE:
            dual = max(dual, y[i])  # must be <= 0
        elif sense == GE:
            dual = max(dual, -y[i])  # must be >= 0
    span = lp.hi - lp.lo
    at_lo = (x - lp.lo) <= _BOUND_ACTIVE_TOL * (1.0 + np.abs(lp.lo))
    at_hi = (lp.hi - x) <= _BOUND_ACTIVE_TOL * (1.0 + np.abs(lp.hi))
    fixed = span <= _BOUND_ACTIVE_TOL
    for j in range(lp.n_vars):
        if fixed[j]:
            continue  # fixed columns impose nothing on z
        if at_lo[j]:
            dual = max(dual, -z[j])
        elif at_hi[j]:
            dual = max(dual, z[j])
        else:
            dual = max(dual, abs(z[j]))

    # complementarity as the relative duality gap with sign-clipped reduced
    # costs (wrong signs are already charged to the dual residual)
    primal_obj = float(lp.obj @ x)
    dual_obj = float(lp.rhs @ y)
    zp = np.where(z > 0, z, 0.0)
    zn = np.where(z < 0, z, 0.0)
    lo_term = np.where(np.isfinite(lp.lo), lp.lo, 0.0) * zp
    hi_term = np.where(np.isfinite(lp.hi), lp.hi, 0.0) * zn
    dual_obj += float(lo_term.sum() + hi_term.sum())
    compl = abs(primal_obj - dual_obj) / (1.0 + abs(primal_obj))

    return KktResiduals(
        primal=float(primal),
        dual=float(dual),
        compl=float(compl),
        primal_scale=1.0 + float(np.max(np.abs(lp.rhs), initial=0.0)),
        dual_scale=1.0 + float(np.max(np.abs(lp.obj), initial=0.0)),
    )


def solve_simplex(lp: LinearProgram, check: bool = True) -> Solution:
    """Solve to optimality (or prove infeasible/unbounded) deterministically."""
    senses = np.array([{LE: 0, EQ: 1, GE: 2}[s] for s in lp.senses])
    le_rows = np.nonzero(senses == 0)[0]
    ge_rows = np.nonzero(senses == 2)[0]
    eq_rows = np.nonzero(senses == 1)[0]

    a_csr = lp.a_matrix
    a_ub = None
    b_ub = None
    ub_rows = list(le_rows) + list(ge_rows)
    if ub_rows:
        parts = []
        rhs_parts = []
        if len(le_rows):
            parts.append(a_csr[le_rows])
            rhs_parts.append(lp.rhs[le_rows])
        if len(ge_rows):
            parts.append(-a_csr[ge_rows])
            rhs_parts.append(-lp.rhs[ge_rows])
        a_ub = sp.vstack(parts, format="csr")
        b_ub = np.concatenate(rhs_parts)
    a_eq = a_csr[eq_rows] if len(eq_rows) else None
    b_eq = lp.rhs[eq_rows] if len(eq_rows) else None

    res = linprog(
        c=lp.obj,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=np.column_stack([lp.lo, lp.hi]),
        method="highs-ds",
    )

    if res.status == 2:
        return Solution("infeasible", None, None, None, None, None)
    if res.status == 3:
        return Solution("unbounded", None, None, None, None, None)
    if res.status != 0:
        raise SolverNumericsError(f"solver failure: {res.message}")

    x = np.asarray(res.x, dtype=float)
    y = np.zeros(lp.n_rows)
    if ub_rows:
        marg = np.asarray(res.ineqlin.marginals, dtype=float)
        y[le_rows] = marg[: len(le_rows)]
        y[ge_rows] = -marg[len(le_rows) :]
    if len(eq_rows):
        y[eq_rows] = np.asarray(res.eqlin.marginals, dtype=float)

    kkt = kkt_residuals(lp, x, y)
    if check and not kkt.ok():
        raise SolverNumericsError(
            f"KKT residuals out of tolerance: primal {kkt.primal:.3e} "
            f"dual {kkt.dual:.3e} compl {kkt.compl:.3e}"
        )
    return Solution(
        status="optimal",
        objective=float(res.fun) + lp.obj_offset,
        x=x,
        row_duals=y,
        reduced_costs=lp.obj - lp.a_matrix.T @ y,
        kkt=kkt,
    )
