"""Tests for the deterministic test functions and design generators."""

import math

import numpy as np
import pytest

from errors import ConfigurationError, InputError
from testbed import (
    DesignSpec,
    design,
    design_table,
    evaluate,
    evaluate_native,
    faure_points,
    get_test_function,
    list_test_functions,
    to_native,
    to_unit,
)


def borehole_oracle(rw, r, Tu, Hu, Tl, Hl, L, Kw):
    log_ratio = math.log(r / rw)
    return 2 * math.pi * Tu * (Hu - Hl) / (
        log_ratio * (1.5 + 2 * L * Tu / (log_ratio * rw ** 2 * Kw) + Tu / Tl)
    )


def piston_oracle(M, S, V0, k, P0, Ta, T0):
    A = P0 * S + 19.62 * M - k * V0 / S
    V = S / (2 * k) * (math.sqrt(A ** 2 + 4 * k * P0 * V0 / T0 * Ta) - A)
    return 2 * math.pi * math.sqrt(M / (k + S ** 2 * P0 * V0 / T0 * Ta / V ** 2))


class TestCatalogue:
    def test_lists_every_function(self):
        assert set(list_test_functions()) == {"zakharov", "piston", "borehole", "welch", "friedman", "robotarm"}

    @pytest.mark.parametrize("fn_id,dim", [
        ("zakharov", 2), ("piston", 7), ("borehole", 8), ("welch", 20), ("friedman", 5), ("robotarm", 8),
    ])
    def test_dimensions(self, fn_id, dim):
        fn = get_test_function(fn_id)
        assert fn.dim == dim
        assert len(fn.domain) == dim
        assert len(fn.names) == dim

    def test_unknown_and_fixed_dimension(self):
        with pytest.raises(ConfigurationError):
            get_test_function("rosenbrock")
        with pytest.raises(ConfigurationError):
            get_test_function("borehole", dim=3)
        assert get_test_function("zakharov", dim=5).dim == 5

    def test_to_dict(self):
        data = get_test_function("piston").to_dict()
        assert data["names"][0] == "M"
        assert data["domain"][3] == [1000.0, 5000.0]


class TestValues:
    def test_zakharov(self):
        fn = get_test_function("zakharov")
        assert evaluate(fn, [0.0, 0.0]) == 0.0
        assert evaluate(fn, [1.0, 1.0]) == pytest.approx(9.3125)
        three = get_test_function("zakharov", dim=3)
        assert evaluate(three, [1.0, 0.0, 0.0]) == pytest.approx(1.0 + 0.25 + 0.0625)

    def test_friedman_zero(self):
        fn = get_test_function("friedman")
        assert evaluate_native(fn, [0.0, 0.5, 0.5, 0.0, 0.0]) == pytest.approx(0.0, abs=1e-14)

    def test_borehole_midpoint(self):
        fn = get_test_function("borehole")
        mid = to_native(fn, np.full(8, 0.5))
        value = evaluate(fn, np.full(8, 0.5))
        assert value == pytest.approx(borehole_oracle(*mid), rel=1e-12)
        assert value == pytest.approx(70.87, abs=0.05)

    def test_piston_matches_oracle(self, rng):
        fn = get_test_function("piston")
        for u in rng.random((20, 7)):
            assert evaluate(fn, u) == pytest.approx(piston_oracle(*to_native(fn, u)), rel=1e-12)

    def test_robotarm_straight_arm(self):
        fn = get_test_function("robotarm")
        assert evaluate_native(fn, [0, 0, 0, 0, 1, 1, 1, 1]) == pytest.approx(4.0)
        assert evaluate_native(fn, [0, math.pi, 0, 0, 1, 1, 0, 0]) == pytest.approx(0.0, abs=1e-12)

    def test_welch_origin(self):
        fn = get_test_function("welch")
        assert evaluate_native(fn, np.zeros(20)) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("fn_id,base", [("piston", 7), ("borehole", 11), ("robotarm", 11), ("welch", 23)])
    def test_sane_over_scrambled_points(self, fn_id, base):
        fn = get_test_function(fn_id)
        U = design(DesignSpec("faure", 10_000, fn.dim, seed=1, base=base))
        y = evaluate(fn, U)
        assert y.shape == (10_000,)
        assert np.all(np.isfinite(y))
        if fn_id == "robotarm":
            assert np.all((y >= 0) & (y <= 4.0))
        if fn_id in ("piston", "borehole"):
            assert np.all(y > 0)


class TestScaling:
    def test_outside_unit_cube(self):
        fn = get_test_function("friedman")
        with pytest.raises(InputError):
            evaluate(fn, [0.5, 0.5, 1.2, 0.5, 0.5])
        with pytest.raises(InputError):
            evaluate(fn, [0.5, 0.5])

    def test_round_trip(self, rng):
        fn = get_test_function("borehole")
        U = rng.random((50, 8))
        np.testing.assert_allclose(to_unit(fn, to_native(fn, U)), U, atol=1e-12)

    def test_batch_and_single(self, rng):
        fn = get_test_function("friedman")
        U = rng.random((4, 5))
        batch = evaluate(fn, U)
        assert isinstance(evaluate(fn, U[0]), float)
        assert batch[2] == pytest.approx(evaluate(fn, U[2]))

    def test_design_table(self, rng):
        fn = get_test_function("zakharov")
        frame = design_table(fn, rng.random((3, 2)))
        assert list(frame.columns) == ["u_1", "u_2", "x_1", "x_2", "y"]
        assert len(frame) == 3


class TestDesigns:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            DesignSpec("sobol", 10, 2)
        with pytest.raises(ConfigurationError):
            DesignSpec("faure", 10, 2, base=8)
        with pytest.raises(ConfigurationError):
            DesignSpec("faure", 10, 8, base=7)
        with pytest.raises(ConfigurationError):
            DesignSpec("uniform", 0, 2)

    @pytest.mark.parametrize("kind", ["uniform", "faure"])
    def test_deterministic_and_in_cube(self, kind):
        spec = DesignSpec(kind, 200, 5, seed=3)
        U = design(spec)
        assert U.shape == (200, 5)
        np.testing.assert_array_equal(U, design(spec))
        assert np.all((U >= 0) & (U < 1))
        assert not np.array_equal(U, design(DesignSpec(kind, 200, 5, seed=4)))

    def test_single_point(self):
        assert design(DesignSpec("faure", 1, 3, seed=0)).shape == (1, 3)

    def test_unscrambled_first_coordinate_is_radical_inverse(self):
        points = faure_points(10, 3, base=7)
        expected = [0, 1 / 7, 2 / 7, 3 / 7, 4 / 7, 5 / 7, 6 / 7, 1 / 49, 8 / 49, 15 / 49]
        np.testing.assert_allclose(points[:, 0], expected, atol=1e-15)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_faure_equidistribution(self, seed):
        U = design(DesignSpec("faure", 343, 7, seed=seed, base=7))
        for j in range(7):
            counts = np.bincount(np.floor(U[:, j] * 7).astype(int), minlength=7)
            np.testing.assert_array_equal(counts, 49)

    def test_faure_gap_bound(self):
        n = 343
        U = design(DesignSpec("faure", n, 7, seed=5, base=7))
        for j in range(7):
            gaps = np.diff(np.concatenate([[0.0], np.sort(U[:, j]), [1.0]]))
            assert gaps.max() <= 2.5 / n

    def test_uniform_gap_bound(self):
        n = 343
        U = design(DesignSpec("uniform", n, 7, seed=5))
        for j in range(7):
            gaps = np.diff(np.concatenate([[0.0], np.sort(U[:, j]), [1.0]]))
            assert gaps.max() <= 25.0 / n
