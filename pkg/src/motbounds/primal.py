"""Discretized primal transport problem as a linear program.

Variables are path masses q(x_1, ..., x_n) >= 0 on the product grid; equality
rows fix every marginal atom mass and force zero conditional drift for every
prefix. The solver is a dense two-phase tableau simplex (Dantzig pricing with
a Bland fallback under degeneracy) so pivot tolerances stay under our control
and no external LP dependency is needed at desk scale. A vertex-enumeration
oracle covers tiny instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cascade import CostSpec
from .measures import MarginalSequence

MASS_TOL = 1e-9
MARGINAL_TOL = 1e-8
MARTINGALE_TOL = 1e-8
PREFIX_MASS_FLOOR = 1e-12

DEFAULT_VAR_CAP = 200_000
DEFAULT_PIVOT_CAP = 1_000_000
BRUTE_FORCE_PATH_CAP = 64
PIVOT_TOL = 1e-9  # relative
SEMISTATIC_TOL = 1e-9


class SizeCapError(RuntimeError):
    """Instance exceeds a configured resource cap."""


@dataclass(frozen=True, eq=False)
class Coupling:
    """Candidate transport plan: nonnegative mass per path on the product grid."""

    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))

    def positive_paths(self, ms: MarginalSequence, floor: float = 1e-15):
        """Rows (x_1, ..., x_n, mass) for paths carrying mass above floor."""
        rows = []
        for idx in np.argwhere(self.q > floor):
            coords = [ms[i].atoms[idx[i]] for i in range(ms.n)]
            rows.append(coords + [float(self.q[tuple(idx)])])
        return rows


@dataclass(frozen=True)
class CouplingReport:
    ok: bool
    mass_error: float
    marginal_errors: tuple
    martingale_error: float

    def summary(self) -> str:
        return (
            f"mass_error={self.mass_error:.3e}, "
            f"marginal_errors={tuple(f'{e:.3e}' for e in self.marginal_errors)}, "
            f"martingale_error={self.martingale_error:.3e}"
        )


def validate_coupling(q, ms: MarginalSequence) -> CouplingReport:
    """Check total mass, per-atom marginals, and zero conditional drift.

    The drift tolerance scales with the prefix mass and the overall grid span;
    prefixes below the mass floor are vacuous.
    """
    q = np.asarray(getattr(q, "q", q), dtype=float)
    if q.shape != ms.sizes:
        raise ValueError(f"coupling shape {q.shape} does not match grids {ms.sizes}")
    mass_error = abs(float(q.sum()) - 1.0)
    marginal_errors = []
    for i in range(ms.n):
        axes = tuple(a for a in range(ms.n) if a != i)
        marginal_errors.append(float(np.max(np.abs(q.sum(axis=axes) - ms[i].weights))))
    span = ms.span
    worst_drift = 0.0
    for i in range(ms.n - 1):
        head = q.sum(axis=tuple(range(i + 2, ms.n))) if i + 2 < ms.n else q
        prefix_mass = head.sum(axis=-1)
        x_i = ms.grids[i].reshape((1,) * i + (-1,))
        drift = head @ ms.grids[i + 1] - prefix_mass * x_i
        live = prefix_mass > PREFIX_MASS_FLOOR
        if np.any(live):
            scaled = np.abs(drift[live]) / (prefix_mass[live] * max(span, 1e-300))
            worst_drift = max(worst_drift, float(scaled.max()))
    ok = (
        mass_error <= MASS_TOL
        and all(e <= MARGINAL_TOL for e in marginal_errors)
        and worst_drift <= MARTINGALE_TOL
    )
    return CouplingReport(ok, mass_error, tuple(marginal_errors), worst_drift)


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Equality-form LP: min c.x, A x = b, x >= 0, plus row bookkeeping."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    row_labels: tuple  # ("marginal", i, atom_index) | ("martingale", i, prefix_flat)
    grid_shape: tuple

    @property
    def n_paths(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.b.size


def assemble_lp(cost: CostSpec, ms: MarginalSequence, var_cap: int = DEFAULT_VAR_CAP) -> LpProblem:
    """Build the coupling polytope LP on the product grid.

    Marginal rows: one per (period, atom), coefficients one on matching paths.
    Martingale rows: one per (period < n, prefix), coefficients x_{i+1} - x_i
    on the paths extending the prefix. Redundant rows (each block re-encodes
    total mass) are left in; the solver tolerates degenerate rank.
    """
    n_paths = ms.path_count
    if n_paths > var_cap:
        raise SizeCapError(f"{n_paths} path variables exceed the cap {var_cap}")
    sizes = ms.sizes
    n = ms.n
    c = cost.tensor_on(ms).ravel()
    rows = []
    labels = []

    for i in range(n):
        for a in range(sizes[i]):
            block = np.zeros(sizes)
            idx = [slice(None)] * n
            idx[i] = a
            block[tuple(idx)] = 1.0
            rows.append(block.ravel())
            labels.append(("marginal", i, a))
    b = [ms[i].weights[a] for i in range(n) for a in range(sizes[i])]

    grids = np.meshgrid(*ms.grids, indexing="ij", sparse=True)
    for i in range(n - 1):
        coef = np.broadcast_to(grids[i + 1] - grids[i], sizes)
        prefix_count = int(np.prod(sizes[: i + 1]))
        tail = n_paths // prefix_count
        coef_mat = coef.reshape(prefix_count, tail)
        for p in range(prefix_count):
            row = np.zeros(n_paths)
            row[p * tail : (p + 1) * tail] = coef_mat[p]
            rows.append(row)
            labels.append(("martingale", i, p))
            b.append(0.0)

    return LpProblem(c, np.asarray(rows), np.asarray(b), tuple(labels), sizes)


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "iteration_limit" | "unbounded"
    x: Optional[np.ndarray]
    value: float
    duals: Optional[np.ndarray]
    pivots: int


def _pivot_loop(T, zrow, basis, n_cols, tol_enter, tol_piv, maxiter, pivots, degen_switch=40):
    """Run pivots until the phase is optimal; returns (status, pivots).

    Dantzig pricing by default; after degen_switch consecutive degenerate
    pivots the rule switches to Bland (smallest eligible index, smallest basis
    index leaving) until the objective strictly improves, which guarantees
    escape from cycling. Pivot elements must clear a threshold relative to
    their column, and ratio ties resolve to the largest pivot element for
    stability (smallest basis index under Bland).
    """
    bland = False
    degen_run = 0
    while pivots < maxiter:
        reduced = zrow[:n_cols]
        if bland:
            elig = np.flatnonzero(reduced < -tol_enter)
            if elig.size == 0:
                return "optimal", pivots
            j = int(elig[0])
        else:
            j = int(np.argmin(reduced))
            if reduced[j] >= -tol_enter:
                return "optimal", pivots
        col = T[:, j]
        floor = max(tol_piv, 1e-7 * float(np.max(np.abs(col))))
        pos = np.flatnonzero(col > floor)
        if pos.size == 0:
            return "unbounded", pivots
        ratios = T[pos, -1] / col[pos]
        theta = ratios.min()
        ties = pos[ratios <= theta + tol_piv * max(1.0, abs(theta))]
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(ties[np.argmax(col[ties])])
        obj_before = zrow[-1]
        piv = T[r] / T[r, j]
        T -= np.outer(T[:, j], piv)
        T[r] = piv
        zrow -= zrow[j] * piv
        basis[r] = j
        pivots += 1
        if abs(zrow[-1] - obj_before) <= tol_enter:
            degen_run += 1
            if degen_run >= degen_switch:
                bland = True
        else:
            degen_run = 0
            bland = False
    return "iteration_limit", pivots


def simplex_solve(c, A, b, maxiter: int = DEFAULT_PIVOT_CAP) -> SimplexResult:
    """Two-phase dense tableau simplex for min c.x, A x = b, x >= 0.

    Rows are equilibrated to unit max magnitude before pivoting so the relative
    pivot tolerances are meaningful across blocks of very different scale. The
    artificial columns stay in the tableau through phase 2; redundant rows
    surface as artificial basics stuck at zero and get multiplier zero. The
    solution and the equality multipliers are re-solved from the final basis
    against the original data, shedding accumulated elimination error.
    """
    A_orig = np.asarray(A, dtype=float)
    b_orig = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A_orig.shape
    flip = b_orig < 0
    A_w = np.where(flip[:, None], -A_orig, A_orig)
    b_w = np.where(flip, -b_orig, b_orig)
    row_scale = np.maximum(np.abs(A_w).max(axis=1), np.abs(b_w))
    row_scale = np.where(row_scale > 0, row_scale, 1.0)
    A_s = A_w / row_scale[:, None]
    b_s = b_w / row_scale

    T = np.hstack([A_s, np.eye(m), b_s[:, None]])
    basis = np.arange(n, n + m)
    scale_c = max(1.0, float(np.abs(c).max()) if c.size else 1.0)
    tol_enter = PIVOT_TOL
    tol_piv = PIVOT_TOL
    pivots = 0

    # phase 1: minimize the artificial mass
    zrow = np.zeros(n + m + 1)
    zrow[: n + m] = np.concatenate([np.zeros(n), np.ones(m)])
    for k in range(m):
        zrow -= T[k]  # basic artificials have unit cost
    status, pivots = _pivot_loop(T, zrow, basis, n, tol_enter, tol_piv, maxiter, pivots)
    if status == "iteration_limit":
        return SimplexResult(status, None, float("nan"), None, pivots)
    infeas = -zrow[-1]
    if infeas > 1e-8 * max(1.0, float(np.abs(b_s).sum())):
        return SimplexResult("infeasible", None, float("nan"), None, pivots)

    # pivot artificials out where the row still has structural support
    redundant = []
    for r in range(m):
        if basis[r] >= n:
            in_basis = set(basis.tolist())
            row = np.where(
                np.isin(np.arange(n), list(in_basis)), 0.0, np.abs(T[r, :n])
            )
            j = int(np.argmax(row))
            if row[j] > tol_piv:
                piv = T[r] / T[r, j]
                T -= np.outer(T[:, j], piv)
                T[r] = piv
                basis[r] = j
                pivots += 1
            else:
                redundant.append(r)
                T[r] = 0.0

    # phase 2 on the true objective
    zrow = np.zeros(n + m + 1)
    zrow[:n] = c / scale_c
    for r in range(m):
        if basis[r] < n and zrow[basis[r]] != 0.0:
            zrow -= zrow[basis[r]] * T[r]
    status, pivots = _pivot_loop(T, zrow, basis, n, tol_enter, tol_piv, maxiter, pivots)
    if status != "optimal":
        return SimplexResult(status, None, float("nan"), None, pivots)

    # refine the basic solution and the multipliers against the original data
    rows_kept = [r for r in range(m) if r not in set(redundant)]
    struct = [r for r in rows_kept if basis[r] < n]
    cols = [int(basis[r]) for r in struct]
    x = np.zeros(n)
    if cols:
        B = A_w[np.ix_(rows_kept, cols)]
        xb, *_ = np.linalg.lstsq(B, b_w[rows_kept], rcond=None)
        x[cols] = xb
    x = np.where(np.abs(x) < 1e-14, 0.0, x)
    duals = np.zeros(m)
    if cols:
        yk, *_ = np.linalg.lstsq(B.T, c[cols], rcond=None)
        duals[rows_kept] = yk
    duals = np.where(flip, -duals, duals)
    return SimplexResult("optimal", x, float(np.dot(c, x)), duals, pivots)


@dataclass(frozen=True, eq=False)
class PrimalSolution:
    """Transport LP outcome with solver statistics and equality multipliers."""

    value: float
    coupling: Optional[Coupling]
    status: str
    stats: dict = field(default_factory=dict)
    duals: Optional[np.ndarray] = None
    row_labels: tuple = ()


def _solve(cost: CostSpec, ms: MarginalSequence, sense: int, var_cap: int, maxiter: int) -> PrimalSolution:
    lp = assemble_lp(cost, ms, var_cap)
    res = simplex_solve(sense * lp.c, lp.A, lp.b, maxiter=maxiter)
    stats = {"rows": lp.n_rows, "columns": lp.n_paths, "pivots": res.pivots}
    if res.status != "optimal":
        return PrimalSolution(float("nan"), None, res.status, stats, None, lp.row_labels)
    q = np.clip(res.x, 0.0, None).reshape(lp.grid_shape)
    value = float(np.dot(lp.c, res.x))
    return PrimalSolution(value, Coupling(q), "optimal", stats, sense * res.duals, lp.row_labels)


def solve_primal(cost: CostSpec, ms: MarginalSequence, var_cap: int = DEFAULT_VAR_CAP,
                 maxiter: int = DEFAULT_PIVOT_CAP) -> PrimalSolution:
    """Minimize over martingale couplings with the given marginals."""
    return _solve(cost, ms, +1, var_cap, maxiter)


def solve_primal_max(cost: CostSpec, ms: MarginalSequence, var_cap: int = DEFAULT_VAR_CAP,
                     maxiter: int = DEFAULT_PIVOT_CAP) -> PrimalSolution:
    """Maximize over martingale couplings (negated objective)."""
    return _solve(cost, ms, -1, var_cap, maxiter)


def _independent_rows(A, b, tol=1e-10):
    """Gaussian elimination to an independent row system; flags inconsistency."""
    M = np.hstack([A, b[:, None]]).astype(float)
    m, n1 = M.shape
    scale = max(1.0, float(np.abs(M).max()))
    rows = []
    r = 0
    for col in range(n1 - 1):
        if r >= m:
            break
        piv = r + int(np.argmax(np.abs(M[r:, col])))
        if abs(M[piv, col]) <= tol * scale:
            continue
        M[[r, piv]] = M[[piv, r]]
        M[r] /= M[r, col]
        others = np.flatnonzero(np.abs(M[:, col]) > 0)
        for k in others:
            if k != r:
                M[k] -= M[k, col] * M[r]
        rows.append(r)
        r += 1
    consistent = True
    for k in range(r, m):
        if abs(M[k, -1]) > 1e-8 * scale:
            consistent = False
    return M[:r, :-1], M[:r, -1], consistent


def brute_force_value(cost: CostSpec, ms: MarginalSequence,
                      path_cap: int = BRUTE_FORCE_PATH_CAP) -> float:
    """Minimum objective over the vertices of the coupling polytope.

    Enumerates basic solutions over all column subsets of the row-reduced
    equality system and keeps the feasible ones. Independent of the simplex
    code path; practical only for tiny instances.
    """
    lp = assemble_lp(cost, ms)
    if lp.n_paths > path_cap:
        raise SizeCapError(f"{lp.n_paths} paths exceed the brute-force cap {path_cap}")
    A_red, b_red, consistent = _independent_rows(lp.A, lp.b)
    if not consistent:
        raise ValueError("equality system inconsistent: instance infeasible")
    r, ncols = A_red.shape
    best = None
    for cols in itertools.combinations(range(ncols), r):
        B = A_red[:, cols]
        try:
            xb = np.linalg.solve(B, b_red)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(xb)) or np.max(np.abs(B @ xb - b_red)) > 1e-8:
            continue
        if np.min(xb) < -1e-9:
            continue
        x = np.zeros(ncols)
        x[list(cols)] = np.clip(xb, 0.0, None)
        if np.max(np.abs(lp.A @ x - lp.b)) > 1e-7:
            continue
        val = float(np.dot(lp.c[list(cols)], xb))
        if best is None or val < best:
            best = val
    if best is None:
        raise ValueError("no feasible vertex: instance infeasible")
    return best


def multipliers_to_semistatic(solution: PrimalSolution, ms: MarginalSequence):
    """Split LP equality multipliers into static tables and trading positions.

    Marginal-row multipliers become u_1, ..., u_n; martingale-row multipliers
    become the prefix-indexed trading positions. Dual feasibility of the LP is
    exactly the pointwise domination required by semistatic_value_check.
    """
    if solution.duals is None:
        raise ValueError("solution carries no multipliers")
    u_tables = [np.zeros(len(ms[i])) for i in range(ms.n)]
    deltas = [np.zeros(ms.sizes[: i + 1]) for i in range(ms.n - 1)]
    for y, label in zip(solution.duals, solution.row_labels):
        kind, i, j = label
        if kind == "marginal":
            u_tables[i][j] = y
        else:
            deltas[i].ravel()[j] = y
    return u_tables, deltas


def semistatic_value_check(cost: CostSpec, ms: MarginalSequence, u_tables, deltas) -> float:
    """Value of a semi-static position dominated by the cost.

    u_tables holds one table per marginal (n of them, including the first);
    deltas[j] is tabulated on the prefix grid of the first j+1 marginals. The
    pointwise inequality static + trading <= cost is enforced on the full
    product grid within 1e-9; the returned value sum_i E_{mu_i}[u_i] never
    exceeds the primal optimum by LP weak duality.
    """
    if len(u_tables) != ms.n:
        raise ValueError(f"expected {ms.n} static tables, got {len(u_tables)}")
    if len(deltas) != ms.n - 1:
        raise ValueError(f"expected {ms.n - 1} trading tables, got {len(deltas)}")
    n = ms.n
    psi = np.zeros(ms.sizes)
    grids = np.meshgrid(*ms.grids, indexing="ij", sparse=True)
    for i in range(n):
        table = np.asarray(getattr(u_tables[i], "values", u_tables[i]), dtype=float)
        if table.shape != (ms.sizes[i],):
            raise ValueError(f"static table {i + 1} has shape {table.shape}")
        shape = [1] * n
        shape[i] = ms.sizes[i]
        psi = psi + table.reshape(shape)
    for j in range(n - 1):
        d = np.asarray(deltas[j], dtype=float)
        if d.shape != ms.sizes[: j + 1]:
            raise ValueError(f"trading table {j + 1} has shape {d.shape}")
        psi = psi + d.reshape(d.shape + (1,) * (n - j - 1)) * (grids[j + 1] - grids[j])
    worst = float((psi - cost.tensor_on(ms)).max())
    if worst > SEMISTATIC_TOL:
        raise ValueError(f"position exceeds the cost by {worst:.3e} on the grid")
    value = 0.0
    for i in range(n):
        table = np.asarray(getattr(u_tables[i], "values", u_tables[i]), dtype=float)
        value += float(np.dot(ms[i].weights, table))
    return value
