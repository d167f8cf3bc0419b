import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ternary_mmc.grid import EdgeField, Grid


def loop_laplacian(u, h):
    # plain-loop five-point stencil, independent of the vectorized operators
    n = u.shape[0]
    out = np.empty_like(u)
    for i in range(n):
        for j in range(n):
            out[i, j] = (u[(i + 1) % n, j] + u[i - 1, j] + u[i, (j + 1) % n] + u[i, j - 1]
                         - 4 * u[i, j]) / h**2
    return out


def loop_edge_inner(f, g, h):
    # [f, g] = h^2 sum a_x(f^x g^x) + a_y(f^y g^y); a_x sums to the plain face sum
    n = f.x.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += 0.5 * (f.x[i, j] * g.x[i, j] + f.x[i - 1, j] * g.x[i - 1, j])
            total += 0.5 * (f.y[i, j] * g.y[i, j] + f.y[i, j - 1] * g.y[i, j - 1])
    return h**2 * total


class TestGridSpec:
    def test_h_times_n(self):
        for n, length in ((4, 1.0), (64, 64.0), (37, 3.3)):
            g = Grid(n, length)
            assert math.isclose(g.h * g.n, length, rel_tol=1e-15)

    @pytest.mark.parametrize("n,length", [(3, 1.0), (0, 1.0), (8, 0.0), (8, -2.0)])
    def test_rejects_invalid(self, n, length):
        with pytest.raises(ValueError):
            Grid(n, length)

    def test_centers_offset(self):
        g = Grid(4, 8.0)
        x, y = g.centers()
        assert np.allclose(x[:, 0], [1, 3, 5, 7])
        assert np.allclose(y[0, :], [1, 3, 5, 7])

    def test_check_rejects_nonfinite(self):
        g = Grid(4, 1.0)
        u = g.zeros()
        u[1, 2] = np.nan
        with pytest.raises(ValueError):
            g.check(u)


class TestDifferences:
    def test_constant_has_zero_differences(self):
        g = Grid(8, 64.0)
        u = np.full(g.shape, 3.7)
        assert np.all(g.diff_x(u) == 0) and np.all(g.diff_y(u) == 0)
        assert np.all(g.avg_x(u) == 3.7) and np.all(g.avg_y(u) == 3.7)

    def test_indicator_stencil(self):
        g = Grid(4, 64.0)
        u = g.zeros()
        u[1, 1] = 1.0
        dx = g.diff_x(u)
        expected = g.zeros()
        expected[1, 1] = -1 / g.h   # face (1+1/2, 1)
        expected[0, 1] = 1 / g.h    # face (0+1/2, 1)
        assert np.array_equal(dx, expected)
        dy = g.diff_y(u)
        expected = g.zeros()
        expected[1, 1] = -1 / g.h
        expected[1, 0] = 1 / g.h
        assert np.array_equal(dy, expected)

    def test_checkerboard_average_vanishes(self):
        g = Grid(8, 1.0)
        i = np.arange(8)[:, None] * np.ones((1, 8))
        u = np.where(i % 2 == 0, 1.0, -1.0)
        assert np.all(g.avg_x(u) == 0)

    def test_composed_central_difference(self, rng):
        g = Grid(8, 5.0)
        u = rng.standard_normal(g.shape)
        central = np.empty_like(u)
        for i in range(8):
            for j in range(8):
                central[i, j] = (u[(i + 1) % 8, j] - u[i - 1, j]) / (2 * g.h)
        assert np.allclose(g.diff_back_x(g.avg_x(u)), central, rtol=0, atol=1e-13)

    def test_face_derivative_second_order(self):
        errs = []
        for n in (64, 128, 256):
            g = Grid(n, 64.0)
            x, _ = g.centers()
            u = np.cos(2 * np.pi * x / 64)
            exact = -2 * np.pi / 64 * np.sin(2 * np.pi * (x + g.h / 2) / 64)
            errs.append(np.max(np.abs(g.diff_x(u) - exact)))
        orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(orders) >= 1.9

    def test_periodic_shift_equivariance(self, rng):
        g = Grid(8, 1.0)
        u = rng.standard_normal(g.shape)
        s = np.roll(u, (3, 5), axis=(0, 1))
        assert np.array_equal(np.roll(g.laplacian(u), (3, 5), axis=(0, 1)), g.laplacian(s))
        # shifting by whole periods is the identity
        assert np.array_equal(g.laplacian(np.roll(u, (8, 16), axis=(0, 1))), g.laplacian(u))


class TestLaplacian:
    def test_matches_loop_stencil(self, rng):
        g = Grid(8, 3.0)
        u = rng.standard_normal(g.shape)
        assert np.allclose(g.laplacian(u), loop_laplacian(u, g.h), rtol=1e-13, atol=1e-13)

    def test_is_div_grad(self, rng):
        g = Grid(16, 64.0)
        u = rng.standard_normal(g.shape)
        assert np.array_equal(g.laplacian(u), g.divergence(g.gradient(u)))

    def test_constant_zero(self):
        g = Grid(8, 1.0)
        assert np.all(g.laplacian(np.full(g.shape, 2.5)) == 0)

    @pytest.mark.parametrize("n,k", [(16, 1), (16, 3), (32, 7), (64, 5)])
    def test_single_mode_eigenvalue(self, n, k):
        g = Grid(n, 64.0)
        x, _ = g.centers()
        u = np.cos(2 * np.pi * k * x / 64)
        lam = 4 / g.h**2 * math.sin(math.pi * k * g.h / 64) ** 2
        assert np.max(np.abs(g.laplacian(u) + lam * u)) <= 1e-12 * lam

    def test_mean_zero(self, rng):
        g = Grid(16, 64.0)
        u = rng.standard_normal(g.shape)
        lap = g.laplacian(u)
        assert abs(g.inner(lap, 1.0)) <= 1e-13 * g.norm2(lap) * g.length

    def test_eigenvalue_table(self):
        g = Grid(8, 2.0)
        lam = g.laplacian_eigenvalues()
        k = np.arange(8)[:, None]
        l = np.arange(5)[None, :]
        ref = 4 / g.h**2 * (np.sin(np.pi * k / 8) ** 2 + np.sin(np.pi * l / 8) ** 2)
        assert lam.shape == (8, 5)
        assert np.allclose(lam, ref, rtol=1e-14, atol=0)


class TestWeightedDivergence:
    def test_unit_coefficient(self, rng):
        g = Grid(8, 1.0)
        f = EdgeField(rng.standard_normal(g.shape), rng.standard_normal(g.shape))
        one = EdgeField(np.ones(g.shape), np.ones(g.shape))
        assert np.array_equal(g.weighted_divergence(one, f), g.divergence(f))

    def test_constant_coefficient(self, rng):
        g = Grid(8, 1.0)
        u = rng.standard_normal(g.shape)
        c = EdgeField(np.full(g.shape, 2.5), np.full(g.shape, 2.5))
        assert np.allclose(g.weighted_divergence(c, g.gradient(u)), 2.5 * g.laplacian(u),
                           rtol=1e-13, atol=1e-12)

    def test_summation_by_parts(self, rng):
        g = Grid(8, 64.0)
        coef = EdgeField(rng.uniform(0.5, 2, g.shape), rng.uniform(0.5, 2, g.shape))
        psi, nu = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
        gn = g.gradient(nu)
        lhs = g.inner(psi, g.weighted_divergence(coef, gn))
        rhs = -loop_edge_inner(g.gradient(psi), EdgeField(coef.x * gn.x, coef.y * gn.y), g.h)
        assert abs(lhs - rhs) <= 1e-13 * max(abs(lhs), 1.0)

    def test_rejects_nonpositive_face(self):
        g = Grid(4, 1.0)
        cx = np.ones(g.shape)
        cx[2, 3] = 0.0
        coef = EdgeField(cx, np.ones(g.shape))
        with pytest.raises(ValueError, match=r"\(2, 3\)"):
            g.weighted_divergence(coef, g.gradient(g.zeros()), require_positive=True)


class TestInnerProducts:
    def test_unit_inner_is_area(self):
        for n in (4, 7, 32):
            g = Grid(n, 64.0)
            one = np.ones(g.shape)
            assert math.isclose(g.inner(one, one), 64.0**2, rel_tol=1e-14)

    def test_edge_inner_matches_loop(self, rng):
        g = Grid(6, 2.0)
        f = EdgeField(rng.standard_normal(g.shape), rng.standard_normal(g.shape))
        k = EdgeField(rng.standard_normal(g.shape), rng.standard_normal(g.shape))
        assert math.isclose(g.inner_edge(f, k), loop_edge_inner(f, k, g.h), rel_tol=1e-13)

    def test_cauchy_schwarz(self, rng):
        g = Grid(8, 64.0)
        for _ in range(100):
            u, v = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
            assert abs(g.inner(u, v)) <= g.norm2(u) * g.norm2(v) * (1 + 1e-14)

    def test_grad_norm_identity(self, rng):
        g = Grid(16, 64.0)
        u = rng.standard_normal(g.shape)
        a = g.grad_norm2(u) ** 2
        b = -g.inner(u, g.laplacian(u))
        assert math.isclose(a, b, rel_tol=1e-13)

    def test_norms(self, rng):
        g = Grid(8, 4.0)
        u = rng.standard_normal(g.shape)
        assert math.isclose(g.normp(u, 2), g.norm2(u), rel_tol=1e-14)
        assert g.norm_inf(u) == np.max(np.abs(u))
        assert math.isclose(g.h1_norm(u) ** 2, g.norm2(u) ** 2 + g.grad_norm2(u) ** 2,
                            rel_tol=1e-14)
        assert math.isclose(g.normp(u, 1), g.h**2 * np.sum(np.abs(u)), rel_tol=1e-14)

    def test_normp_rejects_small_p(self):
        with pytest.raises(ValueError):
            Grid(4, 1.0).normp(np.ones((4, 4)), 0.5)


fields = arrays(np.float64, (8, 8), elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(psi=fields, fx=fields, fy=fields, n_pow=st.sampled_from([4, 8]))
def test_summation_by_parts_property(psi, fx, fy, n_pow):
    g = Grid(8, float(n_pow))
    f = EdgeField(fx, fy)
    lhs = g.inner(psi, g.divergence(f))
    rhs = -g.inner_edge(g.gradient(psi), f)
    # size of the summed terms; squaring f here would underflow for tiny entries
    fmax = max(np.max(np.abs(fx)), np.max(np.abs(fy)))
    scale = g.h**2 * np.sum(np.abs(psi)) * 4 * fmax / g.h
    assert abs(lhs - rhs) <= 1e-12 * scale


@settings(max_examples=60, deadline=None)
@given(f=fields, k=fields)
def test_divergence_mean_zero_property(f, k):
    g = Grid(8, 64.0)
    div = g.divergence(EdgeField(f, k))
    scale = np.sum(np.abs(div)) + 1e-300
    assert abs(np.sum(div)) <= 1e-13 * scale + 1e-300
