import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from nonsmooth_control.nonsmooth import (BreakpointError, MollifiedFunction, Piece, PiecewiseSmoothFunction, bump,
                                         clarke, dir_deriv, epsilon0, eval_f,
                                         eval_fprime_offbreak, eval_fsecond_offbreak, kernel,
                                         kernel_moments,
                                         max_function, mollify, piecewise_linear,
                                         piecewise_polynomial, sigma)

finite = st.floats(-50, 50, allow_nan=False)


def cubic_example():
    # t, then 2t + t^3, then 6t - 3: slope jumps 1 -> 2 at 0 and 5 -> 6 at 1
    return piecewise_polynomial([0.0, 1.0], [[0.0, 1.0], [0.0, 2.0, 0.0, 1.0], [-3.0, 6.0]])


class TestEvaluation:
    def test_max_values(self):
        f = max_function()
        assert eval_f(f, -1.0) == 0.0
        assert eval_f(f, 2.0) == 2.0

    def test_continuity_at_breakpoints(self):
        f = cubic_example()
        for i, tau in enumerate(f.breakpoints, start=1):
            left = f.pieces[i - 1].value(np.array([tau]))[0]
            right = f.pieces[i].value(np.array([tau]))[0]
            assert eval_f(f, tau) == pytest.approx(left) == pytest.approx(right)

    def test_half_open_selection(self):
        f = cubic_example()
        assert f.piece_index(np.array([0.0]))[0] == 0
        assert f.piece_index(np.array([1e-15]))[0] == 1
        assert f.piece_index(np.array([1.0]))[0] == 1

    def test_second_derivative_linear_piece(self):
        assert eval_fsecond_offbreak(max_function(), 3.0) == 0.0

    def test_cubic_derivatives(self):
        f = cubic_example()
        assert eval_fprime_offbreak(f, 0.5) == pytest.approx(2 + 3 * 0.25)
        assert eval_fsecond_offbreak(f, 0.5) == pytest.approx(3.0)

    @pytest.mark.parametrize("fn", [eval_fprime_offbreak, eval_fsecond_offbreak])
    def test_derivatives_reject_breakpoints(self, fn):
        with pytest.raises(BreakpointError):
            fn(max_function(), 0.0)

    def test_vectorized(self):
        f = max_function()
        np.testing.assert_array_equal(f(np.array([-1.0, 0.0, 3.0])), [0.0, 0.0, 3.0])


class TestConstruction:
    def test_sigma_max(self):
        assert sigma(max_function(), 1) == -1.0

    def test_sigma_two_breakpoints(self):
        f = piecewise_linear([0.0, 1.0], [0.0, 1.0, 3.0])
        assert sigma(f, 2) == -2.0
        np.testing.assert_allclose(f.sigmas, [-1.0, -2.0])

    def test_smooth_join_rejected(self):
        with pytest.raises(ValueError, match="vanishes"):
            piecewise_linear([0.0], [1.0, 1.0])

    def test_discontinuity_rejected(self):
        with pytest.raises(ValueError, match="do not match"):
            PiecewiseSmoothFunction([0.0], [Piece.polynomial([0.0]), Piece.polynomial([1.0, 1.0])])

    def test_decreasing_piece_rejected(self):
        with pytest.raises(ValueError, match="monoton"):
            piecewise_linear([0.0], [1.0, -1.0])

    def test_piece_count(self):
        with pytest.raises(ValueError):
            PiecewiseSmoothFunction([0.0], [Piece.polynomial([0.0])])

    def test_sigma_index_range(self):
        with pytest.raises(IndexError):
            max_function().sigma(2)


class TestDirectionalDerivative:
    def test_max_at_kink(self):
        f = max_function()
        assert dir_deriv(f, 0.0, 1.0) == 1.0
        assert dir_deriv(f, 0.0, -1.0) == 0.0

    def test_smooth_region(self):
        assert dir_deriv(max_function(), 2.0, -3.0) == -3.0

    @given(finite)
    def test_zero_direction(self, t):
        assert dir_deriv(cubic_example(), t, 0.0) == 0.0

    @given(finite, finite, st.floats(1e-3, 1e3))
    @settings(max_examples=200)
    def test_positive_homogeneity(self, t, h, lam):
        f = cubic_example()
        assert dir_deriv(f, t, lam * h) == pytest.approx(lam * dir_deriv(f, t, h), rel=1e-12, abs=1e-12)

    @given(st.sampled_from([0.0, 1.0, -0.5, 0.5, 2.0]), finite)
    def test_within_clarke_bounds(self, t, h):
        f = cubic_example()
        lo, hi = clarke(f, t)
        d = dir_deriv(f, t, h)
        bounds = sorted([lo * h, hi * h])
        assert bounds[0] - 1e-12 <= d <= bounds[1] + 1e-12

    def test_matches_one_sided_difference(self):
        f = cubic_example()
        for t in [0.0, 1.0, 0.3]:
            for h in [1.0, -1.0]:
                s = 1e-7
                assert dir_deriv(f, t, h) == pytest.approx((f(t + s * h) - f(t)) / s, rel=1e-5)


class TestClarkeAndEpsilon:
    def test_max(self):
        f = max_function()
        assert clarke(f, 0.0) == (0.0, 1.0)
        assert clarke(f, 5.0) == (1.0, 1.0)

    def test_two_slopes(self):
        assert clarke(piecewise_linear([0.0, 2.0], [0.0, 1.0, 3.0]), 2.0) == (1.0, 3.0)

    @pytest.mark.parametrize("breaks, expected", [([0.0], 1.0), ([0.0, 1.0], 0.25),
                                                  ([0.0, 0.2, 1.0], 0.05)])
    def test_epsilon0(self, breaks, expected):
        f = piecewise_linear(breaks, np.arange(len(breaks) + 1, dtype=float))
        assert epsilon0(f) == pytest.approx(expected)

    def test_epsilon0_strict_bound(self):
        f = piecewise_linear([0.0, 0.2, 1.0], [0.0, 1.0, 2.0, 3.0])
        assert epsilon0(f) < np.min(np.diff(f.breakpoints)) / 2


class TestMollifier:
    def test_kernel_unit_mass(self):
        assert quad(kernel, -1, 1, epsabs=1e-13)[0] == pytest.approx(1.0, abs=1e-10)

    def test_kernel_support(self):
        np.testing.assert_array_equal(bump(np.array([-1.0, 1.0, 1.5])), 0.0)

    def test_exact_outside_kink_band(self):
        fe = mollify(max_function(), 0.1)
        t = np.array([-3.0, -0.1, 0.1, 0.5, 7.0])
        np.testing.assert_allclose(fe.value(t), np.maximum(t, 0), atol=1e-12)

    def test_value_at_kink_brute_force(self):
        eps = 0.1
        fe = mollify(max_function(), eps)
        oracle = quad(lambda s: max(-eps * s, 0.0) * kernel(np.array([s]))[0], -1, 1,
                      epsabs=1e-14, points=[0.0])[0]
        assert fe.value(0.0) == pytest.approx(oracle, rel=1e-9)
        assert fe.value(0.0) > 0

    def test_derivative_brute_force(self):
        f, eps = cubic_example(), 0.2
        fe = mollify(f, eps)
        for t in [-0.05, 0.1, 0.95, 1.1]:
            oracle = quad(lambda s: f.derivative(t - eps * s, strict=False)
                          * kernel(np.array([s]))[0], -1, 1, epsabs=1e-13,
                          points=[(t - b) / eps for b in f.breakpoints if abs(t - b) < eps])[0]
            assert fe.derivative(t) == pytest.approx(oracle, rel=1e-8)

    @pytest.mark.parametrize("f, eps", [
        (max_function(), [0.1, 0.05, 0.025, 0.0125]),
        # curved pieces add an eps^2 term, so the linear regime starts lower
        (cubic_example(), [0.0125, 0.00625, 0.003125, 0.0015625]),
    ])
    def test_rate_is_linear(self, f, eps):
        t = np.linspace(-10, 10, 200001)
        eps = np.array(eps)
        err = [np.max(np.abs(mollify(f, e).value(t) - f(t))) for e in eps]
        slope = np.polyfit(np.log(eps), np.log(err), 1)[0]
        assert abs(slope - 1) <= 0.05

    def test_monotone(self):
        f = cubic_example()
        t = np.linspace(-3, 3, 5001)
        for e in [0.3, 0.05]:
            assert np.min(mollify(f, e).derivative(t)) >= -1e-12

    def test_error_bounded_by_lipschitz_times_eps(self):
        f, eps = cubic_example(), 0.05
        t = np.linspace(-2, 3, 4001)
        lip = f.slope_bound(-2.1, 3.1)
        assert np.max(np.abs(mollify(f, eps).value(t) - f(t))) <= lip * eps

    def test_far_from_breakpoints_exact(self):
        f, eps = cubic_example(), 0.05
        t = np.array([-1.0, 0.5, 2.0])
        np.testing.assert_allclose(mollify(f, eps).value(t), f(t), atol=1e-10 + 0.5 * eps**2 * 6)

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ValueError):
            mollify(max_function(), 0.0)


class TestClosedFormMollifier:
    @pytest.mark.parametrize("c", [-1.0, -0.7, -0.1, 0.0, 0.33, 0.95, 1.0])
    def test_moments_against_quad(self, c):
        got = kernel_moments(np.array(c), 3)
        def moment(k, upper):
            return quad(lambda s: s**k * bump(np.array([s]))[0], -1.0, upper,
                        epsabs=1e-14, limit=200)[0]

        mass = moment(0, 1.0)
        for k in range(4):
            ref = moment(k, c) / mass
            assert got[k] == pytest.approx(ref, abs=1e-13)

    def test_moments_clip_and_mass(self):
        got = kernel_moments(np.array([-3.0, 3.0]), 2)
        np.testing.assert_array_equal(got[0], 0.0)
        assert got[1, 0] == pytest.approx(1.0, abs=1e-15)
        assert got[1, 1] == pytest.approx(0.0, abs=1e-15)  # symmetric kernel

    @pytest.mark.parametrize("f", [max_function(), cubic_example()])
    @pytest.mark.parametrize("eps", [0.3, 0.05])
    def test_matches_fine_quadrature(self, f, eps):
        t = np.linspace(-1.5, 2.5, 801)
        closed, fine = f.mollify(eps), MollifiedFunction(f, eps, nodes=512)
        assert closed.closed_form and not fine.closed_form
        np.testing.assert_allclose(closed.value(t), fine.value(t), atol=1e-12)
        np.testing.assert_allclose(closed.derivative(t), fine.derivative(t), atol=1e-10)

    def test_value_and_derivative_agree(self):
        fe = cubic_example().mollify(0.2)
        t = np.linspace(-1.0, 2.0, 301).reshape(7, 43)
        v, d = fe.value_and_derivative(t)
        np.testing.assert_array_equal(v, fe.value(t))
        np.testing.assert_array_equal(d, fe.derivative(t))
        assert v.shape == t.shape

    def test_derivative_nonnegative(self):
        fe = max_function().mollify(1e-3)
        assert np.min(fe.derivative(np.linspace(-0.01, 0.01, 10001))) >= 0.0
