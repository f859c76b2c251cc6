"""Independent reference computations for solver tests.

The vertex oracle never calls the production solver: it enumerates every
candidate active set directly, so agreement is evidence rather than
circularity.
"""

import itertools

import numpy as np

from gridres.lp import EQ, GE, LE, LpBuilder
from gridres.prng import Rng

FEAS_TOL = 1e-9


def vertex_optimum(lp):
    """Brute-force optimum of a boxed LP by basic-solution enumeration.

    Every vertex of {x : Ax ~ b, lo <= x <= hi} has n linearly independent
    active constraints; with all variables boxed the region is bounded, so
    a finite optimum (if any) is attained at one of them. Returns the best
    objective, or None when no feasible vertex exists.
    """
    n = lp.n_vars
    dense = lp.a_matrix.toarray()

    normals = [dense[i] for i in range(lp.n_rows)]
    offsets = [lp.rhs[i] for i in range(lp.n_rows)]
    eq_rows = [i for i, s in enumerate(lp.senses) if s == EQ]
    for j in range(n):
        if not (np.isfinite(lp.lo[j]) and np.isfinite(lp.hi[j])):
            raise ValueError("oracle requires boxed variables")
        e = np.zeros(n)
        e[j] = 1.0
        normals.append(e.copy())
        offsets.append(lp.lo[j])
        normals.append(e)
        offsets.append(lp.hi[j])
    normals = np.array(normals)
    offsets = np.array(offsets)

    free = [i for i in range(len(normals)) if i not in set(eq_rows)]
    need = n - len(eq_rows)
    if need < 0:
        raise ValueError("more equalities than variables")
    combos = list(itertools.combinations(free, need))
    if not combos:
        combos = [()]
    sel = np.array([list(eq_rows) + list(c) for c in combos], dtype=int)

    mats = normals[sel]  # (n_combos, n, n)
    rhss = offsets[sel]  # (n_combos, n)
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-10
    if not np.any(ok):
        return None
    xs = np.linalg.solve(mats[ok], rhss[ok][..., None])[..., 0]

    # feasibility of each candidate vertex against the full system
    ax = xs @ dense.T
    feas = np.ones(len(xs), dtype=bool)
    for i, s in enumerate(lp.senses):
        gap = ax[:, i] - lp.rhs[i]
        if s == LE:
            feas &= gap <= FEAS_TOL
        elif s == GE:
            feas &= gap >= -FEAS_TOL
        else:
            feas &= np.abs(gap) <= FEAS_TOL
    feas &= np.all(xs >= lp.lo - FEAS_TOL, axis=1)
    feas &= np.all(xs <= lp.hi + FEAS_TOL, axis=1)
    if not np.any(feas):
        return None
    return float(np.min(xs[feas] @ lp.obj)) + lp.obj_offset


def random_boxed_lp(seed, feasible=True):
    """Small random LP with every variable boxed.

    With feasible=True the right-hand sides are anchored to an interior
    point, so the instance is feasible by construction; otherwise slacks may
    go negative and the instance can be (but is not always) infeasible.
    """
    rng = Rng(seed)
    n = 2 + rng.below(5)  # 2..6 variables
    m = 2 + rng.below(7)  # 2..8 rows

    b = LpBuilder()
    lo = np.array([-round(rng.uniform(0.0, 2.0), 3) for _ in range(n)])
    hi = lo + np.array([round(rng.uniform(0.5, 4.0), 3) for _ in range(n)])
    cols = [
        b.var(f"x{j}", lo[j], hi[j], round(rng.uniform(-3.0, 3.0), 3))
        for j in range(n)
    ]

    x0 = np.array([rng.uniform(lo[j], hi[j]) for j in range(n)])
    n_eq = 1 if (not feasible and rng.below(4) == 0) else 0
    for i in range(m):
        coefs = np.array([round(rng.uniform(-2.0, 2.0), 3) for _ in range(n)])
        for j in range(n):
            if rng.below(4) == 0 and np.count_nonzero(coefs) > 2:
                coefs[j] = 0.0
        lhs0 = float(coefs @ x0)
        if i < n_eq:
            b.row(f"r{i}", EQ, round(lhs0, 6), list(zip(cols, coefs)))
            continue
        slack = rng.uniform(0.0, 1.5) if feasible else rng.uniform(-0.6, 1.2)
        if rng.below(2) == 0:
            b.row(f"r{i}", LE, round(lhs0 + slack, 6), list(zip(cols, coefs)))
        else:
            b.row(f"r{i}", GE, round(lhs0 - slack, 6), list(zip(cols, coefs)))
    return b.build()


def reference_lloyd(feats, k, init_indices, tol=1e-9, max_iter=300):
    """Plain Lloyd's algorithm with fixed initial medoid indices; returns the
    final assignment labels. Ties go to the lowest centroid index."""
    centroids = feats[np.array(init_indices)].copy()
    for _ in range(max_iter):
        d = np.linalg.norm(feats[:, None, :] - centroids[None, :, :], axis=2)
        labels = np.argmin(d, axis=1)
        moved = 0.0
        for g in range(k):
            members = feats[labels == g]
            if len(members) == 0:
                continue
            new = members.mean(axis=0)
            moved = max(moved, float(np.linalg.norm(new - centroids[g])))
            centroids[g] = new
        if moved < tol:
            break
    d = np.linalg.norm(feats[:, None, :] - centroids[None, :, :], axis=2)
    return np.argmin(d, axis=1), centroids
