"""Hull construction, envelope evaluation, and the conjugate cross-check."""

import numpy as np
import pytest

from motbounds import (
    GridFunction,
    OutOfDomainError,
    biconjugate_eval,
    concave_envelope,
    convex_envelope,
    envelope_weights,
    eval_envelope,
)

from conftest import random_grid_function

TENT = GridFunction([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0])
PARAB = GridFunction([-2.0, -1.0, 0.0, 1.0, 2.0], [4.0, 1.0, 0.0, 1.0, 4.0])
ZIGZAG = GridFunction([0.0, 1.0, 2.0, 3.0], [0.0, -1.0, 3.0, 0.0])


def affine_minorant_value(f: GridFunction, t: float) -> float:
    """Brute-force envelope oracle: best affine function below all points.

    Every supporting line at an interior point passes through two grid points
    (or one, at a knot, where the two-point line through the knot and any hull
    neighbour attains the same value), so scanning all pairs suffices.
    """
    x, y = f.grid, f.values
    if x.size == 1:
        return float(y[0])
    best = -np.inf
    for i in range(x.size):
        for j in range(i + 1, x.size):
            slope = (y[j] - y[i]) / (x[j] - x[i])
            intercept = y[i] - slope * x[i]
            if np.all(slope * x + intercept <= y + 1e-12):
                best = max(best, slope * t + intercept)
    return float(best)


class TestConvexEnvelope:
    def test_tent_collapses_to_chord(self):
        env = convex_envelope(TENT)
        assert np.array_equal(env.hull_grid, [-1.0, 1.0])
        assert np.array_equal(env.hull_values, [0.0, 0.0])
        assert eval_envelope(env, 0.5) == pytest.approx(0.0)

    def test_convex_function_is_its_own_hull(self):
        env = convex_envelope(PARAB)
        assert np.array_equal(env.hull_grid, PARAB.grid)
        assert np.array_equal(env.hull_values, PARAB.values)

    def test_zigzag_hull_and_value(self):
        env = convex_envelope(ZIGZAG)
        assert np.array_equal(env.hull_grid, [0.0, 1.0, 3.0])
        assert np.array_equal(env.hull_values, [0.0, -1.0, 0.0])
        expected = affine_minorant_value(ZIGZAG, 2.0)
        assert expected == pytest.approx(-0.5)
        assert eval_envelope(env, 2.0) == pytest.approx(expected)

    def test_single_point(self):
        env = convex_envelope(GridFunction([2.0], [5.0]))
        assert eval_envelope(env, 2.0) == pytest.approx(5.0)

    def test_collinear_points_dropped(self):
        env = convex_envelope(GridFunction([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]))
        assert np.array_equal(env.hull_grid, [0.0, 2.0])


class TestConcaveEnvelope:
    def test_tent_already_concave(self):
        env = concave_envelope(TENT)
        assert np.array_equal(env.hull_grid, TENT.grid)

    def test_chord_over_parabola(self):
        env = concave_envelope(PARAB)
        assert np.array_equal(env.hull_grid, [-2.0, 2.0])
        assert eval_envelope(env, 0.0) == pytest.approx(4.0)

    def test_zigzag_upper_hull(self):
        env = concave_envelope(ZIGZAG)
        assert np.array_equal(env.hull_grid, [0.0, 2.0, 3.0])
        # negate-and-reuse oracle
        neg = GridFunction(ZIGZAG.grid, -ZIGZAG.values)
        assert eval_envelope(env, 1.0) == pytest.approx(
            -eval_envelope(convex_envelope(neg), 1.0)
        )
        assert eval_envelope(env, 1.0) == pytest.approx(1.5)

    def test_duality_with_convex_envelope(self, rng):
        for _ in range(100):
            f = random_grid_function(rng, max_len=40)
            neg = GridFunction(f.grid, -f.values)
            up = concave_envelope(f)
            lo = convex_envelope(neg)
            for t in rng.uniform(f.grid[0], f.grid[-1], size=5):
                assert eval_envelope(up, t) == pytest.approx(
                    -eval_envelope(lo, t), abs=1e-10
                )


class TestEvalAndWeights:
    def test_knot_hit(self):
        env = convex_envelope(PARAB)
        assert eval_envelope(env, -1.0) == pytest.approx(1.0)

    def test_interpolation_on_segment(self):
        env = convex_envelope(ZIGZAG)
        assert eval_envelope(env, 2.0) == pytest.approx(-0.5)

    def test_out_of_domain_raises(self):
        env = convex_envelope(TENT)
        with pytest.raises(OutOfDomainError):
            eval_envelope(env, 1.5)

    def test_clamp_within_tolerance(self):
        env = convex_envelope(TENT)
        assert eval_envelope(env, 1.0 + 1e-10) == pytest.approx(0.0)

    def test_weights_midpoint(self):
        env = convex_envelope(TENT)
        left, right, lam = envelope_weights(env, 0.0)
        assert (env.hull_grid[left], env.hull_grid[right]) == (-1.0, 1.0)
        assert lam == pytest.approx(0.5)

    def test_weights_knot_collapse(self):
        env = convex_envelope(TENT)
        left, right, lam = envelope_weights(env, -1.0)
        assert left == right and lam == 1.0

    def test_weights_reconstruct_value(self):
        env = convex_envelope(ZIGZAG)
        left, right, lam = envelope_weights(env, 2.0)
        assert (env.hull_grid[left], env.hull_grid[right]) == (1.0, 3.0)
        assert lam == pytest.approx(0.5)
        value = lam * env.hull_values[left] + (1 - lam) * env.hull_values[right]
        assert value == pytest.approx(eval_envelope(env, 2.0))

    def test_weights_reproduce_point(self, rng):
        for _ in range(50):
            f = random_grid_function(rng, max_len=30, min_len=2)
            env = convex_envelope(f)
            t = float(rng.uniform(f.grid[0], f.grid[-1]))
            left, right, lam = envelope_weights(env, t)
            recon = lam * env.hull_grid[left] + (1 - lam) * env.hull_grid[right]
            assert recon == pytest.approx(t, abs=1e-12)


class TestBiconjugate:
    def test_tent(self):
        assert biconjugate_eval(TENT, 0.0) == pytest.approx(0.0)

    def test_parabola_chord_value(self):
        # on the unit-spaced grid the hull chord between 0 and 1 gives 0.5
        assert biconjugate_eval(PARAB, 0.5) == pytest.approx(0.5)

    def test_zigzag(self):
        assert biconjugate_eval(ZIGZAG, 2.0) == pytest.approx(-0.5)

    def test_matches_hull_path(self, rng):
        for _ in range(200):
            f = random_grid_function(rng, max_len=60)
            env = convex_envelope(f)
            t = float(rng.uniform(f.grid[0], f.grid[-1]))
            assert abs(biconjugate_eval(f, t) - eval_envelope(env, t)) < 1e-9


class TestEnvelopeProperties:
    def test_minorant_idempotent_convex(self, rng):
        for _ in range(150):
            f = random_grid_function(rng, max_len=80)
            env = convex_envelope(f)
            # minorant at every grid point
            for j in range(len(f)):
                assert eval_envelope(env, float(f.grid[j])) <= f.values[j] + 1e-12
            # hull slopes nondecreasing
            if env.hull_grid.size > 2:
                slopes = np.diff(env.hull_values) / np.diff(env.hull_grid)
                assert np.all(np.diff(slopes) > -1e-12)
            # idempotence
            again = convex_envelope(GridFunction(env.hull_grid, env.hull_values))
            assert np.array_equal(again.hull_grid, env.hull_grid)
            assert np.array_equal(again.hull_values, env.hull_values)

    def test_largest_minorant(self, rng):
        for _ in range(30):
            f = random_grid_function(rng, max_len=50, min_len=2)
            env = convex_envelope(f)
            for _ in range(20):
                slope = rng.uniform(-3, 3)
                intercept = float(np.min(f.values - slope * f.grid)) - rng.uniform(0, 1)
                t = float(rng.uniform(f.grid[0], f.grid[-1]))
                assert slope * t + intercept <= eval_envelope(env, t) + 1e-12

    def test_affine_equivariance(self, rng):
        for _ in range(50):
            f = random_grid_function(rng, max_len=40)
            a, b = rng.uniform(-2, 2, size=2)
            shifted = GridFunction(f.grid, f.values + a + b * f.grid)
            e1 = convex_envelope(f)
            e2 = convex_envelope(shifted)
            for t in rng.uniform(f.grid[0], f.grid[-1], size=5):
                lhs = eval_envelope(e2, float(t))
                rhs = eval_envelope(e1, float(t)) + a + b * t
                assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_hull_keeps_endpoints(self, rng):
        for _ in range(50):
            f = random_grid_function(rng, max_len=30)
            env = convex_envelope(f)
            assert env.hull_grid[0] == f.grid[0]
            assert env.hull_grid[-1] == f.grid[-1]
            assert env.hull_indices[0] == 0
            assert env.hull_indices[-1] == len(f) - 1


class TestGridFunctionValidation:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError, match="increasing"):
            GridFunction([0.0, 0.0], [1.0, 2.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            GridFunction([0.0, 1.0], [1.0])
