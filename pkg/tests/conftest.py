"""Shared instance generators and the acceptance summary hook."""

import numpy as np
import pytest

from motbounds import (
    CostSpec,
    DiscreteMeasure,
    DualVariables,
    GridFunction,
    MarginalSequence,
    split_atom,
    validate_sequence,
)

# collected by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def spread_measure(rng, base: DiscreteMeasure, splits: int, h_scale: float = 0.6) -> DiscreteMeasure:
    """Apply random mean-preserving spreads; dominates base in convex order."""
    mu = base
    for _ in range(splits):
        i = int(rng.integers(len(mu)))
        h = h_scale * (0.25 + rng.random())
        mu = split_atom(mu, i, h)
    return mu


def random_marginals(rng, n: int, max_size: int = 15, start_atoms: int = 1) -> MarginalSequence:
    """Feasible marginal sequence built by chained mean-preserving spreads."""
    start = 10.0 * (rng.random() - 0.5)
    if start_atoms == 1:
        mu = DiscreteMeasure.point(start)
    else:
        mu = DiscreteMeasure.point(start)
        mu = spread_measure(rng, mu, start_atoms - 1)
    marginals = [mu]
    for _ in range(n - 1):
        budget = max_size - len(marginals[-1])
        splits = int(rng.integers(1, max(2, budget + 1)))
        marginals.append(spread_measure(rng, marginals[-1], splits))
    ms = MarginalSequence(marginals)
    assert validate_sequence(ms).ok
    return ms


def random_cost(rng, ms: MarginalSequence) -> CostSpec:
    """One of the named payoffs with an instance-scaled strike."""
    mean = ms[0].mean
    span = ms.span
    form = ("squared_increment", "abs_increment", "terminal_call", "basket")[
        int(rng.integers(4))
    ]
    if form in ("terminal_call", "basket"):
        strike = mean + span * 0.4 * (rng.random() - 0.5)
        return CostSpec(ms.n, form, strike=strike)
    return CostSpec(ms.n, form)


def random_instance(rng, n: int, max_size: int = 15, start_atoms: int = 1):
    ms = random_marginals(rng, n, max_size=max_size, start_atoms=start_atoms)
    return random_cost(rng, ms), ms


def random_duals(rng, ms: MarginalSequence, scale: float = 1.0) -> DualVariables:
    return DualVariables.from_tables(
        ms, [scale * rng.standard_normal(len(m)) for m in ms.marginals[1:]]
    )


def random_grid_function(rng, max_len: int = 200, min_len: int = 1) -> GridFunction:
    m = int(rng.integers(min_len, max_len + 1))
    grid = np.sort(rng.choice(np.linspace(-10, 10, 4001), size=m, replace=False))
    values = 3.0 * rng.standard_normal(m)
    if rng.random() < 0.3:  # mix in curvature so hulls are not always trivial
        values += rng.uniform(-1, 1) * grid**2
    return GridFunction(grid, values)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
