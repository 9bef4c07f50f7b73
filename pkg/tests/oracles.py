"""Independent brute-force oracles used by the test-suite."""

from __future__ import annotations

import itertools
import math

import numpy as np

from carbon_offload.simplex import LpProblem


def vertex_enumeration(p: LpProblem, tol: float = 1e-7) -> tuple[float, np.ndarray] | None:
    """Minimum of a bounded LP over all vertices of its feasible polytope.

    Every vertex is the unique solution of the equality rows plus n - m_eq
    active inequalities (rows, finite lower bounds, finite upper bounds).
    Returns None when no vertex is feasible.
    """
    n = p.n_vars
    g_rows = [p.a_ub]
    h_rows = [p.b_ub]
    eye = np.eye(n)
    lo = np.isfinite(p.lower)
    up = np.isfinite(p.upper)
    g_rows += [-eye[lo], eye[up]]
    h_rows += [-p.lower[lo], p.upper[up]]
    g = np.vstack(g_rows)
    h = np.concatenate(h_rows)
    m_eq = p.a_eq.shape[0]
    k = n - m_eq
    if k < 0 or k > g.shape[0]:
        return None

    if k == 0:
        combos = np.zeros((1, 0), dtype=int)
    else:
        combos = np.array(list(itertools.combinations(range(g.shape[0]), k)), dtype=int)
    best: tuple[float, np.ndarray] | None = None
    for chunk in np.array_split(combos, max(1, math.ceil(len(combos) / 200_000))):
        mats = np.empty((len(chunk), n, n))
        rhs = np.empty((len(chunk), n))
        mats[:, :m_eq] = p.a_eq
        rhs[:, :m_eq] = p.b_eq
        mats[:, m_eq:] = g[chunk]
        rhs[:, m_eq:] = h[chunk]
        det = np.abs(np.linalg.det(mats))
        norms = np.prod(np.linalg.norm(mats, axis=2), axis=1)
        ok = det > 1e-9 * np.maximum(norms, 1e-300)
        if not ok.any():
            continue
        xs = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
        viol = np.maximum((xs @ g.T - h).max(axis=1, initial=0.0), 0.0)
        if m_eq:
            viol = np.maximum(viol, np.abs(xs @ p.a_eq.T - p.b_eq).max(axis=1))
        feas = viol <= tol * (1.0 + np.abs(h).max(initial=0.0))
        if not feas.any():
            continue
        xs = xs[feas]
        objs = xs @ p.c
        i = int(np.argmin(objs))
        if best is None or objs[i] < best[0]:
            best = (float(objs[i]), xs[i])
    return best


def vertex_candidates(p: LpProblem) -> int:
    """How many active sets :func:`vertex_enumeration` would solve."""
    n_ineq = p.a_ub.shape[0] + int(np.isfinite(p.lower).sum()) + int(np.isfinite(p.upper).sum())
    return math.comb(n_ineq, max(p.n_vars - p.a_eq.shape[0], 0))


def random_feasible_lp(rng: np.random.Generator, max_vars: int = 10, max_rows: int = 10,
                       degenerate: bool = False, max_candidates: int = 20_000) -> LpProblem:
    """A random bounded, feasible LP with at most ``max_vars`` variables and ``max_rows`` rows.

    Draws whose vertex enumeration would exceed ``max_candidates`` active
    sets are redrawn so the brute-force oracle stays cheap.
    """
    while True:
        p = _random_lp(rng, max_vars, max_rows, degenerate)
        if vertex_candidates(p) <= max_candidates:
            return p


def _random_lp(rng: np.random.Generator, max_vars: int, max_rows: int, degenerate: bool) -> LpProblem:
    n = int(rng.integers(1, max_vars + 1))
    rows = int(rng.integers(1, max_rows + 1))
    m_eq = int(rng.integers(0, min(rows, n, 3) + 1)) if rng.random() < 0.4 else 0
    m_ub = rows - m_eq
    x_feas = rng.uniform(0.0, 2.0, n)
    c = rng.normal(size=n)
    a_ub = rng.normal(size=(m_ub, n))
    b_ub = a_ub @ x_feas + (0.0 if degenerate else rng.uniform(0.0, 1.0, m_ub))
    if m_ub:
        # One all-positive row keeps the polytope bounded (lower bounds are 0).
        a_ub[0] = rng.uniform(0.1, 1.0, n)
        b_ub[0] = a_ub[0] @ x_feas + rng.uniform(0.0, 1.0)
    a_eq = rng.normal(size=(m_eq, n))
    b_eq = a_eq @ x_feas
    upper = np.full(n, np.inf)
    if m_ub == 0:
        upper[:] = x_feas + rng.uniform(0.0, 1.0, n)
    else:
        boxed = rng.random(n) < 0.2
        upper[boxed] = x_feas[boxed] + rng.uniform(0.0, 1.0, boxed.sum())
    return LpProblem(c, a_ub, b_ub, a_eq, b_eq, np.zeros(n), upper)
