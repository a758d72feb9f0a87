"""Inductive envelope cascades, the dual objective, and its supergradient.

Starting from the terminal tensor c(x_1..x_n) - sum_i u_i(x_i), each level
replaces the dependence on the last coordinate by the value of its convex
(lower-bound problem) or concave (upper-bound problem) envelope at the
previous coordinate. Three variants are supported:

* "proposition": subtract all u_i upfront, then envelope level by level;
* "remark_a":    same recursion with concave envelopes (upper bound);
* "remark_b":    keep the raw cost at the top and subtract each u_{i+1}
                 from the section right before the envelope at level i.

The dual objective is the mu_1-expectation of the bottom level plus the
marginal expectations of the u_i. It is concave (proposition / remark_b) or
convex (remark_a) and piecewise affine in the u tables; the supergradient is
assembled by pushing the mu_1 weights down through the two-point envelope
representations and depositing the arriving mass on the touched u slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .envelope import CLAMP_REL, GridFunction, OutOfDomainError
from .measures import MarginalSequence

VARIANTS = ("proposition", "remark_a", "remark_b")
LOWER_VARIANTS = ("proposition", "remark_b")

COST_FORMS = ("squared_increment", "abs_increment", "terminal_call", "basket", "custom_table")

GROWTH_TOL = 1e-9
RECOMPUTE_TOL = 1e-10
SUBHEDGE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CostSpec:
    """An n-variate cost: a named closed form or an explicit tensor.

    Named forms: squared_increment sum (x_{i+1}-x_i)^2, abs_increment
    sum |x_{i+1}-x_i|, terminal_call (x_n-K)_+, basket (mean(x)-K)_+.
    custom_table takes a tensor on the product grid. growth_constant K
    declares the lower-bound c(x) >= -K (1 + sum |x_i|), checked by scanning
    the tensor.
    """

    n: int
    form: str
    strike: Optional[float] = None
    table: Optional[np.ndarray] = None
    growth_constant: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("cost arity must be at least 2")
        if self.form not in COST_FORMS:
            raise ValueError(f"unknown cost form {self.form!r}; expected one of {COST_FORMS}")
        if self.form in ("terminal_call", "basket") and self.strike is None:
            raise ValueError(f"cost form {self.form!r} needs a strike")
        if self.form == "custom_table":
            if self.table is None:
                raise ValueError("custom_table needs a value tensor")
            table = np.asarray(self.table, dtype=float)
            if table.ndim != self.n:
                raise ValueError(f"table has {table.ndim} axes, expected {self.n}")
            object.__setattr__(self, "table", table)

    def tensor_on(self, ms: MarginalSequence) -> np.ndarray:
        """Cost values on the full product grid, shape = marginal sizes."""
        if ms.n != self.n:
            raise ValueError(f"cost arity {self.n} vs {ms.n} marginals")
        grids = np.meshgrid(*ms.grids, indexing="ij", sparse=True)
        if self.form == "squared_increment":
            out = sum((grids[i + 1] - grids[i]) ** 2 for i in range(self.n - 1))
        elif self.form == "abs_increment":
            out = sum(np.abs(grids[i + 1] - grids[i]) for i in range(self.n - 1))
        elif self.form == "terminal_call":
            out = np.maximum(grids[-1] - self.strike, 0.0)
        elif self.form == "basket":
            out = np.maximum(sum(grids) / self.n - self.strike, 0.0)
        else:  # custom_table
            if self.table.shape != ms.sizes:
                raise ValueError(
                    f"table shape {self.table.shape} does not match grids {ms.sizes}"
                )
            return self.table.copy()
        return np.broadcast_to(out, ms.sizes).copy()

    def check_growth(self, ms: MarginalSequence) -> float:
        """Scan the tensor for c(x) >= -K (1 + sum |x_i|); returns worst slack."""
        grids = np.meshgrid(*ms.grids, indexing="ij", sparse=True)
        bound = -self.growth_constant * (1.0 + sum(np.abs(g) for g in grids))
        slack = self.tensor_on(ms) - bound
        worst = float(slack.min())
        if worst < -GROWTH_TOL:
            raise ValueError(
                f"cost dips {-worst:.3e} below the declared growth bound "
                f"(growth_constant = {self.growth_constant})"
            )
        return worst


@dataclass(frozen=True, eq=False)
class DualVariables:
    """Static dual positions u_2, ..., u_n, tabulated on the marginal atoms."""

    funcs: tuple  # GridFunction for mu_2, ..., mu_n

    def __init__(self, funcs: Sequence[GridFunction]):
        object.__setattr__(self, "funcs", tuple(funcs))

    @classmethod
    def zeros(cls, ms: MarginalSequence) -> "DualVariables":
        return cls(
            [GridFunction(m.atoms, np.zeros(len(m))) for m in ms.marginals[1:]]
        )

    @classmethod
    def from_tables(cls, ms: MarginalSequence, tables: Sequence[np.ndarray]) -> "DualVariables":
        if len(tables) != ms.n - 1:
            raise ValueError(f"expected {ms.n - 1} tables, got {len(tables)}")
        return cls(
            [GridFunction(m.atoms, t) for m, t in zip(ms.marginals[1:], tables)]
        )

    def tables(self) -> list:
        return [f.values.copy() for f in self.funcs]

    def validate_against(self, ms: MarginalSequence) -> None:
        if len(self.funcs) != ms.n - 1:
            raise ValueError(
                f"expected {ms.n - 1} dual functions, got {len(self.funcs)}"
            )
        for i, f in enumerate(self.funcs, start=2):
            if not np.array_equal(f.grid, ms[i - 1].atoms):
                raise ValueError(f"grid of u_{i} does not match the atoms of marginal {i}")

    def as_json(self) -> list:
        return [{"grid": f.grid.tolist(), "values": f.values.tolist()} for f in self.funcs]

    @classmethod
    def from_json(cls, payload: list) -> "DualVariables":
        return cls([GridFunction(np.asarray(d["grid"]), np.asarray(d["values"])) for d in payload])


@dataclass(frozen=True, eq=False)
class CascadeTensors:
    """All cascade levels T_1, ..., T_n plus the two-point envelope supports.

    levels[i-1] holds T_i on the prefix product grid of mu_1 x ... x mu_i.
    supports[i-1] = (left, right, lam) arrays over level-i prefixes: the
    atom indices of mu_{i+1} supporting the envelope value and its convex
    combination weight (artifact data used by the supergradient and the
    hedge check).
    """

    variant: str
    levels: tuple
    supports: tuple = field(repr=False, default=())


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """Dual variables with their attained objective value."""

    variant: str
    dual_variables: DualVariables
    dual_value: float
    gap_vs_primal: Optional[float] = None

    def as_dict(self) -> dict:
        out = {
            "variant": self.variant,
            "u": self.dual_variables.as_json(),
            "dual_value": self.dual_value,
        }
        if self.gap_vs_primal is not None:
            out["gap_vs_primal"] = self.gap_vs_primal
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "DualCertificate":
        return cls(
            payload["variant"],
            DualVariables.from_json(payload["u"]),
            float(payload["dual_value"]),
            payload.get("gap_vs_primal"),
        )


def terminal_tensor(cost: CostSpec, ms: MarginalSequence, u: DualVariables) -> np.ndarray:
    """Top-level tensor: cost minus the static positions, on the product grid."""
    u.validate_against(ms)
    out = cost.tensor_on(ms)
    for i, f in enumerate(u.funcs, start=1):  # u over mu_{i+1}, axis i
        shape = [1] * ms.n
        shape[i] = len(f)
        out -= f.values.reshape(shape)
    return out


def _batched_envelope(sections, sec_grid, eval_atoms, lower):
    """Envelope value of every section row at one point per row.

    sections has shape (rows, m) with row r tabulating a function on sec_grid;
    row r is evaluated at eval_atoms[r % len(eval_atoms)] (rows enumerate
    prefixes in row-major order, so the last prefix coordinate cycles
    fastest). The value at t of the lower (upper) hull equals the min (max)
    over two-point convex combinations lam*f(y_a) + (1-lam)*f(y_b) with
    y_a <= t <= y_b and lam*y_a + (1-lam)*y_b = t; the minimizing pair is the
    supporting pair of the hull, returned for the supergradient.
    """
    rows, m = sections.shape
    me = eval_atoms.size
    span = sec_grid[-1] - sec_grid[0]
    eps = CLAMP_REL * span
    vals = np.empty(rows)
    left = np.empty(rows, dtype=np.intp)
    right = np.empty(rows, dtype=np.intp)
    lam = np.empty(rows)
    for k in range(me):
        t = float(eval_atoms[k])
        if t < sec_grid[0] - eps or t > sec_grid[-1] + eps:
            raise OutOfDomainError(
                f"evaluation point {t!r} outside the next support "
                f"[{sec_grid[0]!r}, {sec_grid[-1]!r}]; support nesting violated"
            )
        t = min(max(t, float(sec_grid[0])), float(sec_grid[-1]))
        p = int(np.searchsorted(sec_grid, t, side="right")) - 1
        q = int(np.searchsorted(sec_grid, t, side="left"))
        li = np.arange(0, p + 1)
        ri = np.arange(q, m)
        den = sec_grid[ri][None, :] - sec_grid[li][:, None]
        safe = np.where(den > 0, den, 1.0)
        lam_pairs = np.where(den > 0, (sec_grid[ri][None, :] - t) / safe, 1.0)
        rows_k = sections[k::me]
        chords = (
            rows_k[:, li][:, :, None] * lam_pairs[None]
            + rows_k[:, ri][:, None, :] * (1.0 - lam_pairs[None])
        ).reshape(rows_k.shape[0], -1)
        pos = chords.argmin(axis=1) if lower else chords.argmax(axis=1)
        ai, bi = np.unravel_index(pos, (li.size, ri.size))
        vals[k::me] = chords[np.arange(rows_k.shape[0]), pos]
        left[k::me] = li[ai]
        right[k::me] = ri[bi]
        lam[k::me] = lam_pairs[ai, bi]
    return vals, left, right, lam


def cascade_down(t_n: np.ndarray, ms: MarginalSequence, variant: str = "proposition") -> CascadeTensors:
    """Run the envelope recursion from the terminal tensor down to level 1.

    For i = n-1, ..., 1: every one-dimensional section of T_{i+1} in its last
    coordinate (on the atoms of mu_{i+1}) is replaced by the value of its
    convex envelope (lower variants) or concave envelope (remark_a) at the
    matching atom of mu_i.
    """
    if variant not in ("proposition", "remark_a"):
        raise ValueError(f"variant {variant!r} not handled by cascade_down")
    if t_n.shape != ms.sizes:
        raise ValueError(f"terminal tensor shape {t_n.shape} vs grids {ms.sizes}")
    lower = variant != "remark_a"
    levels = [None] * ms.n
    supports = [None] * (ms.n - 1)
    levels[ms.n - 1] = t_n
    cur = t_n
    for i in range(ms.n - 1, 0, -1):  # build T_i from T_{i+1}
        sections = cur.reshape(-1, ms.sizes[i])
        vals, lft, rgt, lam = _batched_envelope(
            sections, ms.grids[i], ms.grids[i - 1], lower
        )
        cur = vals.reshape(ms.sizes[:i])
        levels[i - 1] = cur
        supports[i - 1] = (lft, rgt, lam)
    return CascadeTensors(variant, tuple(levels), tuple(supports))


def cascade_down_stepwise(cost: CostSpec, ms: MarginalSequence, u: DualVariables) -> CascadeTensors:
    """Deferred-subtraction recursion: the top level is the raw cost and each
    u_{i+1} is subtracted from the section right before the envelope at level i.

    Coincides with the proposition recursion for n = 2 and for u identically 0.
    """
    u.validate_against(ms)
    cur = cost.tensor_on(ms)
    levels = [None] * ms.n
    supports = [None] * (ms.n - 1)
    levels[ms.n - 1] = cur
    for i in range(ms.n - 1, 0, -1):
        sections = cur.reshape(-1, ms.sizes[i]) - u.funcs[i - 1].values[None, :]
        vals, lft, rgt, lam = _batched_envelope(
            sections, ms.grids[i], ms.grids[i - 1], lower=True
        )
        cur = vals.reshape(ms.sizes[:i])
        levels[i - 1] = cur
        supports[i - 1] = (lft, rgt, lam)
    return CascadeTensors("remark_b", tuple(levels), tuple(supports))


def dual_cascade(variant: str, cost: CostSpec, ms: MarginalSequence, u: DualVariables) -> CascadeTensors:
    """Dispatch to the variant's recursion."""
    if variant == "remark_b":
        return cascade_down_stepwise(cost, ms, u)
    if variant in ("proposition", "remark_a"):
        return cascade_down(terminal_tensor(cost, ms, u), ms, variant)
    raise ValueError(f"unknown variant {variant!r}")


def dual_objective(variant: str, cost: CostSpec, ms: MarginalSequence, u: DualVariables) -> float:
    """E_{mu_1}[T_1] plus the marginal expectations of the u_i.

    Lower bound of the transport value for the lower variants, upper bound of
    the sup problem for remark_a.
    """
    casc = dual_cascade(variant, cost, ms, u)
    return _objective_from_cascade(casc, ms, u)


def _objective_from_cascade(casc: CascadeTensors, ms: MarginalSequence, u: DualVariables) -> float:
    value = float(np.dot(ms[0].weights, casc.levels[0]))
    for i, f in enumerate(u.funcs, start=1):
        value += float(np.dot(ms[i].weights, f.values))
    return value


def dual_value_and_subgradient(variant: str, cost: CostSpec, ms: MarginalSequence, u: DualVariables):
    """Objective value and one supergradient table per u_i, in one pass.

    The mu_1 weights are pushed down level by level through the supporting
    two-point combinations; each u_i slot receives minus the mass that reaches
    it (at the terminal level for proposition/remark_a, at its own level for
    remark_b) plus its marginal weight. Sums to zero per u_i by conservation.
    """
    casc = dual_cascade(variant, cost, ms, u)
    value = _objective_from_cascade(casc, ms, u)
    grads = [ms[i].weights.copy() for i in range(1, ms.n)]
    mass = ms[0].weights.copy()
    for i in range(1, ms.n):  # transition: level i prefixes -> level i+1
        lft, rgt, lam = casc.supports[i - 1]
        m_next = ms.sizes[i]
        base = np.arange(mass.size) * m_next
        nxt = np.zeros(mass.size * m_next)
        np.add.at(nxt, base + lft, mass * lam)
        np.add.at(nxt, base + rgt, mass * (1.0 - lam))
        if variant == "remark_b":
            grads[i - 1] -= nxt.reshape(mass.size, m_next).sum(axis=0)
        mass = nxt
    if variant != "remark_b":
        full = mass.reshape(ms.sizes)
        for i in range(1, ms.n):
            axes = tuple(a for a in range(ms.n) if a != i)
            grads[i - 1] -= full.sum(axis=axes)
    return value, grads


def dual_subgradient(variant: str, cost: CostSpec, ms: MarginalSequence, u: DualVariables) -> list:
    """Per-atom supergradient tables of the dual objective, one per u_i."""
    return dual_value_and_subgradient(variant, cost, ms, u)[1]


@dataclass(frozen=True)
class SubhedgeReport:
    """Per-atom conditional slack of the candidate sub-hedge under a coupling."""

    atoms: np.ndarray
    slacks: np.ndarray
    ok: bool

    @property
    def min_slack(self) -> float:
        return float(self.slacks.min()) if self.slacks.size else 0.0

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "atoms": self.atoms.tolist(),
            "slacks": self.slacks.tolist(),
            "min_slack": self.min_slack,
        }


def verify_subhedge(cost: CostSpec, ms: MarginalSequence, u: DualVariables, coupling) -> SubhedgeReport:
    """Check that the cascade strategy sub-hedges c conditionally on the start.

    For every first-period atom with positive mass the conditional expectation
    under the coupling of T_1(S_1) + sum u_i(S_i) must not exceed the
    conditional expectation of the cost, up to 1e-9. The coupling must pass
    marginal and martingale validation first.
    """
    from .primal import validate_coupling  # deferred to avoid a module cycle

    q = np.asarray(getattr(coupling, "q", coupling), dtype=float)
    report = validate_coupling(q, ms)
    if not report.ok:
        raise ValueError(f"coupling failed validation: {report.summary()}")
    casc = dual_cascade("proposition", cost, ms, u)
    t1 = casc.levels[0]
    cost_tensor = cost.tensor_on(ms)
    static_total = np.zeros(ms.sizes)
    for i, f in enumerate(u.funcs, start=1):
        shape = [1] * ms.n
        shape[i] = len(f)
        static_total = static_total + f.values.reshape(shape)
    tail_axes = tuple(range(1, ms.n))
    start_mass = q.sum(axis=tail_axes)
    cond_cost = (q * cost_tensor).sum(axis=tail_axes)
    cond_static = (q * static_total).sum(axis=tail_axes)
    keep = ms[0].weights > 0
    mass = np.where(start_mass > 0, start_mass, 1.0)
    lhs = t1 + cond_static / mass
    rhs = cond_cost / mass
    slacks = (rhs - lhs)[keep]
    return SubhedgeReport(ms[0].atoms[keep], slacks, bool(np.all(slacks >= -SUBHEDGE_TOL)))
