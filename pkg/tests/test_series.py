import numpy as np
import pytest
from hypothesis import given, strategies as st

from gphot import series as ser
from gphot.series import ContextMismatchError, SeriesContext, SingularSeriesError


def rand_series(ctx, seed, const=1.0):
    r = np.random.default_rng(seed)
    c = (r.normal(size=ctx.shape) + 1j * r.normal(size=ctx.shape)) * 0.5
    c[(0,) * ctx.var_count] = const
    return ser.Series(ctx, c)


def test_variable_examples():
    a = ser.variable(SeriesContext((3,)), 0)
    assert np.allclose(a.coeffs, [0, 1, 0, 0])
    b = ser.variable(SeriesContext((2, 2)), 1, 0.5)
    assert b[0, 0] == 0.5 and b[0, 1] == 1 and np.count_nonzero(b.coeffs) == 2
    c = ser.variable(SeriesContext((0,)), 0, 2.0)
    assert np.allclose(c.coeffs, [2])
    with pytest.raises(IndexError):
        ser.variable(SeriesContext((2,)), 1)


def test_ring_examples():
    ctx = SeriesContext((2,))
    y = ser.variable(ctx, 0)
    assert np.allclose(((1 + y) * (1 - y)).coeffs, [1, 0, -1])
    assert np.allclose(((1 + y) + (2 - y)).coeffs, [3, 0, 0])
    assert np.allclose((y * y).coeffs, [0, 0, 1])
    y1 = ser.variable(SeriesContext((1,)), 0)
    assert np.allclose((y1 * y1).coeffs, [0, 0])


def test_reciprocal_examples():
    ctx = SeriesContext((3,))
    y = ser.variable(ctx, 0)
    assert np.allclose(ser.reciprocal(1 - y).coeffs, [1, 1, 1, 1])
    assert np.allclose(ser.reciprocal(ser.constant(ctx, 2.0)).coeffs, [0.5, 0, 0, 0])
    ctx2 = SeriesContext((2,))
    y = ser.variable(ctx2, 0)
    a = 1 + y + y * y / 2
    assert (a * ser.reciprocal(a)).allclose(ser.constant(ctx2, 1.0))
    with pytest.raises(SingularSeriesError):
        ser.reciprocal(y)


def test_exp_log_examples():
    ctx = SeriesContext((5,))
    y = ser.variable(ctx, 0)
    fact = np.array([1, 1, 2, 6, 24, 120.0])
    assert np.allclose(ser.exp(y).coeffs, 1 / fact)
    assert np.allclose(ser.log(1 + y).coeffs, [0, 1, -1 / 2, 1 / 3, -1 / 4, 1 / 5])
    with pytest.raises(SingularSeriesError):
        ser.log(-1 + y)


def test_pow_examples():
    ctx = SeriesContext((4,))
    y = ser.variable(ctx, 0)
    # (1 - y)^(-2) = sum (k + 1) y^k
    assert np.allclose(ser.pow_real(1 - y, -2).coeffs, [1, 2, 3, 4, 5])
    assert np.allclose(ser.pow_real(1 + y, 0.5).coeffs, [1, 0.5, -0.125, 0.0625, -0.0390625])
    assert np.allclose(((1 + y) ** 3).coeffs, [1, 3, 3, 1, 0])


def test_large_negative_power_is_accurate():
    # (1 + n - n y)^(-256) has Poisson-like coefficients; no cancellation allowed
    n = 4 / 256
    ctx = SeriesContext((20,))
    y = ser.variable(ctx, 0)
    got = ser.pow_real(1 + n - n * y, -256).coeffs.real
    k = np.arange(21)
    from scipy import stats

    ref = stats.nbinom.pmf(k, 256, 1 / (1 + n))
    assert np.max(np.abs(got / ref - 1)) < 1e-12


def test_context_mismatch():
    a = ser.variable(SeriesContext((2,)), 0)
    b = ser.variable(SeriesContext((3,)), 0)
    with pytest.raises(ContextMismatchError):
        a + b
    with pytest.raises(ContextMismatchError):
        a * b


def test_derivative_and_coefficient():
    ctx = SeriesContext((3, 2))
    x, y = ser.variable(ctx, 0), ser.variable(ctx, 1)
    f = ser.exp(2 * x + 3 * y)
    assert abs(f.derivative((3, 2)) - 2**3 * 3**2) < 1e-12
    assert abs(ser.coefficient(f, (1, 1)) - 6) < 1e-12
    with pytest.raises(IndexError):
        f[(4, 0)]


def test_lift_restrict_roundtrip():
    ctx0 = SeriesContext((2,))
    ctx = ctx0.extend((3,))
    y = ser.variable(ctx0, 0)
    a = ser.exp(y)
    lifted = ser.lift(a, ctx)
    assert np.allclose(lifted.coeffs[:, 0], a.coeffs)
    assert np.allclose(lifted.coeffs[:, 1:], 0)
    t = ser.variable(ctx, 1)
    b = lifted * ser.exp(t)
    assert ser.restrict(b, ctx0, (2,)).allclose(a / 2)


def test_broadcast_kernels():
    ctx = SeriesContext((3,))
    a = np.stack([rand_series(ctx, s).coeffs for s in range(4)])
    r = ser.reciprocal_coeffs(a, 1)
    for i in range(4):
        assert np.allclose(r[i], ser.reciprocal(ser.Series(ctx, a[i])).coeffs)


orders = st.lists(st.integers(0, 3), min_size=1, max_size=3).map(tuple)
seeds = st.integers(0, 2**31 - 1)


@given(orders, seeds, seeds, seeds)
def test_ring_axioms(o, s1, s2, s3):
    ctx = SeriesContext(o)
    a, b, c = rand_series(ctx, s1), rand_series(ctx, s2), rand_series(ctx, s3)
    lhs, rhs = (a * b) * c, a * (b * c)
    assert np.allclose(lhs.coeffs, rhs.coeffs, rtol=1e-13, atol=1e-13 * np.abs(lhs.coeffs).max())
    lhs, rhs = a * (b + c), a * b + a * c
    assert np.allclose(lhs.coeffs, rhs.coeffs, rtol=1e-13, atol=1e-13 * np.abs(lhs.coeffs).max())


@given(orders, seeds, st.floats(0.1, 3.0))
def test_reciprocal_property(o, s, c0):
    ctx = SeriesContext(o)
    a = rand_series(ctx, s, c0)
    one = a * ser.reciprocal(a)
    err = np.abs(one.coeffs - ser.constant(ctx, 1.0).coeffs).max()
    assert err < 1e-10 * max(1.0, np.abs(ser.reciprocal(a).coeffs).max())


@given(orders, seeds, seeds)
def test_exp_homomorphism(o, s1, s2):
    ctx = SeriesContext(o)
    a, b = rand_series(ctx, s1, 0.3), rand_series(ctx, s2, -0.2)
    lhs, rhs = ser.exp(a + b), ser.exp(a) * ser.exp(b)
    assert np.allclose(lhs.coeffs, rhs.coeffs, rtol=1e-12, atol=1e-12 * np.abs(lhs.coeffs).max())


@given(orders, seeds, st.floats(0.5, 2.0))
def test_inverse_sqrt_property(o, s, c0):
    ctx = SeriesContext(o)
    a = rand_series(ctx, s, c0)
    b = ser.pow_real(a, -0.5)
    one = b * b * a
    assert np.abs(one.coeffs - ser.constant(ctx, 1.0).coeffs).max() < 1e-12 * max(1, np.abs(b.coeffs).max() ** 2 * np.abs(a.coeffs).max())


@given(seeds, st.floats(-0.5, 0.5))
def test_first_order_matches_finite_difference(s, x0):
    def f(x):
        if isinstance(x, ser.Series):
            return ser.exp(x * x) * ser.reciprocal(2 + x) + ser.pow_real(1.5 + x, 0.3)
        return np.exp(x * x) / (2 + x) + (1.5 + x) ** 0.3

    ctx = SeriesContext((1,))
    d = f(ser.variable(ctx, 0, x0))[(1,)]
    h = 1e-6
    fd = (f(x0 + h) - f(x0 - h)) / (2 * h)
    assert abs(d - fd) <= 1e-5 * abs(fd) + 1e-9
