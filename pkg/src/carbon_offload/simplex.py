"""Dense two-phase tableau simplex for small linear programs.

Pivoting follows Bland's rule (lowest eligible entering index, lowest basic
index among ratio-test ties), which terminates on degenerate problems and
makes the basis sequence a pure function of the input.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

PIVOT_TOL = 1e-9
OPTIMALITY_TOL = 1e-12
MAX_ITERATIONS = 1_000_000


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class IterationLimitError(RuntimeError):
    pass


def _as_matrix(a, n: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.zeros((0, n))
    return a


def _as_vector(v, m: int) -> np.ndarray:
    if v is None:
        return np.zeros(m)
    return np.atleast_1d(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class LpProblem:
    """minimize c·x  s.t.  a_ub x <= b_ub,  a_eq x = b_eq,  lower <= x <= upper."""

    c: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = c.size
        a_ub, a_eq = _as_matrix(self.a_ub, n), _as_matrix(self.a_eq, n)
        b_ub, b_eq = _as_vector(self.b_ub, a_ub.shape[0]), _as_vector(self.b_eq, a_eq.shape[0])
        lower = np.zeros(n) if self.lower is None else _as_vector(self.lower, n)
        upper = np.full(n, np.inf) if self.upper is None else _as_vector(self.upper, n)
        if a_ub.shape[1] != n or a_eq.shape[1] != n:
            raise ValueError("constraint matrices must have one column per variable")
        if b_ub.shape != (a_ub.shape[0],) or b_eq.shape != (a_eq.shape[0],):
            raise ValueError("right-hand sides must have one entry per row")
        if lower.shape != (n,) or upper.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        if np.any(lower > upper):
            raise ValueError("lower bounds must not exceed upper bounds")
        for arr in (c, a_ub, a_eq, b_ub, b_eq):
            if not np.all(np.isfinite(arr)):
                raise ValueError("problem data must be finite")
        if np.any(np.isposinf(lower)) or np.any(np.isneginf(upper)):
            raise ValueError("bounds must admit a finite value")
        for name, val in (("c", c), ("a_ub", a_ub), ("b_ub", b_ub), ("a_eq", a_eq),
                          ("b_eq", b_eq), ("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, val)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def residuals(self, x: np.ndarray) -> tuple[float, float, float]:
        """Worst (inequality, equality, bound) violation of ``x``."""
        ub = float(np.max(self.a_ub @ x - self.b_ub, initial=0.0))
        eq = float(np.max(np.abs(self.a_eq @ x - self.b_eq), initial=0.0))
        bnd = float(max(np.max(self.lower - x, initial=0.0), np.max(x - self.upper, initial=0.0)))
        return ub, eq, bnd


@dataclass(frozen=True)
class StandardForm:
    """minimize c·z s.t. a z = b, z >= 0, with x = x0 + d @ z[:n_struct] + const."""

    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    x0: np.ndarray
    d: np.ndarray
    n_struct: int
    n_ub_rows: int
    objective_offset: float

    def to_original(self, z: np.ndarray) -> np.ndarray:
        return self.x0 + self.d @ z[: self.n_struct]


def to_standard_form(p: LpProblem) -> StandardForm:
    n = p.n_vars
    x0 = np.zeros(n)
    cols: list[np.ndarray] = []
    bound_rows: list[tuple[int, float]] = []
    for k in range(n):
        lo, up = p.lower[k], p.upper[k]
        unit = np.zeros(n)
        unit[k] = 1.0
        if np.isfinite(lo):
            x0[k] = lo
            cols.append(unit)
            if np.isfinite(up):
                bound_rows.append((len(cols) - 1, up - lo))
        elif np.isfinite(up):
            x0[k] = up
            cols.append(-unit)
        else:
            cols.append(unit)
            cols.append(-unit)
    d = np.array(cols).T if cols else np.zeros((n, 0))
    n_struct = d.shape[1]

    bnd = np.zeros((len(bound_rows), n_struct))
    for r, (col, _) in enumerate(bound_rows):
        bnd[r, col] = 1.0
    a_ub = np.vstack([p.a_ub @ d, bnd])
    b_ub = np.concatenate([p.b_ub - p.a_ub @ x0, [width for _, width in bound_rows]])
    a_eq = p.a_eq @ d
    b_eq = p.b_eq - p.a_eq @ x0
    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]

    a = np.zeros((m_ub + m_eq, n_struct + m_ub))
    a[:m_ub, :n_struct] = a_ub
    a[:m_ub, n_struct:] = np.eye(m_ub)
    a[m_ub:, :n_struct] = a_eq
    c = np.concatenate([d.T @ p.c, np.zeros(m_ub)])
    return StandardForm(c, a, np.concatenate([b_ub, b_eq]), x0, d, n_struct, m_ub,
                        float(p.c @ x0))


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None
    objective: float | None
    iterations: int
    dual: np.ndarray | None = None  # standard-form row duals
    standard_form: StandardForm | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    def __init__(self, a: np.ndarray, b: np.ndarray, max_iter: int, pivot_tol: float,
                 opt_tol: float) -> None:
        m, n = a.shape
        self.t = np.zeros((m + 1, n + 1))
        self.t[:m, :n] = a
        self.t[:m, -1] = b
        self.basis = np.full(m, -1, dtype=int)
        self.max_iter = max_iter
        self.pivot_tol = pivot_tol
        self.opt_tol = opt_tol
        self.iterations = 0

    def pivot(self, r: int, j: int) -> None:
        t = self.t
        t[r] /= t[r, j]
        col = t[:, j].copy()
        col[r] = 0.0
        t -= np.outer(col, t[r])
        t[:, j] = 0.0
        t[r, j] = 1.0
        self.basis[r] = j

    def run(self, allowed: np.ndarray) -> tuple[LpStatus, int]:
        t = self.t
        m = t.shape[0] - 1
        while True:
            reduced = t[-1, :-1]
            eligible = np.flatnonzero((reduced < -self.opt_tol) & allowed)
            if eligible.size == 0:
                return LpStatus.OPTIMAL, -1
            j = int(eligible[0])
            col = t[:m, j]
            pos = col > self.pivot_tol
            if not pos.any():
                return LpStatus.UNBOUNDED, j
            if self.iterations >= self.max_iter:
                raise IterationLimitError(f"simplex exceeded {self.max_iter} iterations")
            rhs = np.maximum(t[:m, -1], 0.0)
            ratios = np.full(m, np.inf)
            ratios[pos] = rhs[pos] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
            r = int(ties[np.argmin(self.basis[ties])])
            self.pivot(r, j)
            self.iterations += 1


def simplex_solve(p: LpProblem, *, max_iter: int = MAX_ITERATIONS, pivot_tol: float = PIVOT_TOL,
                  opt_tol: float = OPTIMALITY_TOL) -> LpSolution:
    sf = to_standard_form(p)
    a, b = sf.a.copy(), sf.b.copy()
    m, n = a.shape

    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0
    # Row scaling only conditions the tableau; duals are recovered from sf.a below.
    # Slack columns are left alone so they stay unit vectors.
    scale = np.max(np.abs(a[:, : sf.n_struct]), axis=1, initial=0.0)
    scale[scale == 0] = 1.0
    a[:, : sf.n_struct] /= scale[:, None]
    b /= scale

    slack_basic = np.zeros(m, dtype=bool)
    slack_basic[: sf.n_ub_rows] = ~flip[: sf.n_ub_rows]
    art_rows = np.flatnonzero(~slack_basic)
    n_art = art_rows.size

    tab = _Tableau(np.hstack([a, np.zeros((m, n_art))]), b, max_iter, pivot_tol, opt_tol)
    for i in range(sf.n_ub_rows):
        if slack_basic[i]:
            tab.basis[i] = sf.n_struct + i
    for k, i in enumerate(art_rows):
        tab.t[i, n + k] = 1.0
        tab.basis[i] = n + k

    is_art = np.zeros(n + n_art, dtype=bool)
    is_art[n:] = True

    if n_art:
        tab.t[-1, :] = 0.0
        tab.t[-1, :n] = -tab.t[art_rows, :n].sum(axis=0)
        tab.t[-1, -1] = -tab.t[art_rows, -1].sum()
        status, _ = tab.run(~is_art)
        infeas = -tab.t[-1, -1]
        if infeas > 1e-9 * max(1.0, float(np.max(np.abs(b), initial=0.0))):
            return LpSolution(LpStatus.INFEASIBLE, None, None, tab.iterations, standard_form=sf)
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= n:
                cand = np.flatnonzero(np.abs(tab.t[r, :n]) > pivot_tol)
                if cand.size:
                    tab.pivot(r, int(cand[0]))
                else:
                    keep[r] = False
        tab.t = np.vstack([tab.t[:m][keep], tab.t[-1:]])
        tab.t = np.hstack([tab.t[:, :n], tab.t[:, -1:]])
        tab.basis = tab.basis[keep]
    else:
        keep = np.ones(m, dtype=bool)

    c_scale = float(np.max(np.abs(sf.c), initial=0.0)) or 1.0
    c = sf.c / c_scale
    rows = tab.t[:-1]
    tab.t[-1, :-1] = c - c[tab.basis] @ rows[:, :-1]
    tab.t[-1, -1] = -(c[tab.basis] @ rows[:, -1])
    status, _ = tab.run(np.ones(n, dtype=bool))
    if status is LpStatus.UNBOUNDED:
        return LpSolution(status, None, None, tab.iterations, standard_form=sf)

    z = np.zeros(n)
    z[tab.basis] = np.maximum(tab.t[:-1, -1], 0.0)
    x = sf.to_original(z)

    dual = np.zeros(m)
    if tab.basis.size:
        basis_matrix = sf.a[keep][:, tab.basis]
        dual[keep] = np.linalg.lstsq(basis_matrix.T, sf.c[tab.basis], rcond=None)[0]
    return LpSolution(LpStatus.OPTIMAL, x, float(p.c @ x), tab.iterations, dual, sf)
