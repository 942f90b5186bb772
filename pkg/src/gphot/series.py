"""Truncated multivariate power series with complex coefficients.

A :class:`Series` stores every coefficient inside a per-variable truncation
box, ``coeffs[k1, ..., kD]`` being the coefficient of ``y1**k1 ... yD**kD``.
Arithmetic is exact arithmetic in the truncated polynomial ring, which makes
the coefficients equal to scaled mixed partial derivatives at the expansion
point (``d^k f / dy^k = k! * coeff_k``).

The module-level ``*_coeffs`` kernels act on the trailing ``ndim`` axes of an
array and broadcast over any leading axes, so that :mod:`gphot.linalg` can run
elimination on whole rows of series at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from numbers import Number

import numpy as np

__all__ = [
    "ContextMismatchError",
    "Series",
    "SeriesContext",
    "SingularSeriesError",
    "coefficient",
    "constant",
    "exp",
    "log",
    "pow_real",
    "reciprocal",
    "variable",
]


class SingularSeriesError(ArithmeticError):
    """Raised when an operation needs a non-zero (or off-branch-cut) constant term."""


class ContextMismatchError(ValueError):
    """Raised when series from different truncation contexts are combined."""


@dataclass(frozen=True)
class SeriesContext:
    """Truncation box shared by all series of one expression.

    ``orders[i]`` is the highest power of variable ``i`` that is kept.
    """

    orders: tuple[int, ...]

    def __init__(self, orders=()):
        orders = tuple(int(o) for o in orders)
        if any(o < 0 for o in orders):
            raise ValueError(f"truncation orders must be >= 0, got {orders}")
        object.__setattr__(self, "orders", orders)

    @property
    def var_count(self) -> int:
        return len(self.orders)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(o + 1 for o in self.orders)

    @property
    def max_degree(self) -> int:
        return sum(self.orders)

    def extend(self, orders) -> "SeriesContext":
        return SeriesContext(self.orders + tuple(orders))

    def check_index(self, k) -> tuple[int, ...]:
        k = tuple(int(i) for i in k)
        if len(k) != self.var_count:
            raise IndexError(f"multi-index {k} has wrong length for {self.var_count} variables")
        if any(i < 0 or i > o for i, o in zip(k, self.orders)):
            raise IndexError(f"multi-index {k} outside truncation box {self.orders}")
        return k


# ----------------------------------------------------------------------------
# array kernels (trailing `ndim` axes are the series axes)


@lru_cache(maxsize=None)
def _degree_grid(shape: tuple[int, ...]) -> np.ndarray:
    if not shape:
        return np.zeros((), dtype=np.int64)
    grids = np.meshgrid(*[np.arange(n) for n in shape], indexing="ij")
    return np.sum(grids, axis=0)


def mul_coeffs(a: np.ndarray, b: np.ndarray, ndim: int) -> np.ndarray:
    """Cauchy product of coefficient arrays, restricted to the truncation box."""
    if ndim == 0:
        return a * b
    box = a.shape[-ndim:]
    if b.shape[-ndim:] != box:
        raise ContextMismatchError("coefficient boxes differ")
    out_shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.zeros(out_shape, dtype=np.result_type(a, b, np.complex128))
    # loop over the operand with fewer non-zero box entries
    nz_a = np.any(a.reshape(-1, *box) != 0, axis=0)
    nz_b = np.any(b.reshape(-1, *box) != 0, axis=0)
    if nz_b.sum() < nz_a.sum():
        a, b, nz_a = b, a, nz_b
    pad = (None,) * ndim
    for idx in zip(*np.nonzero(nz_a)):
        src = (Ellipsis,) + tuple(slice(0, n - i) for i, n in zip(idx, box))
        dst = (Ellipsis,) + tuple(slice(i, None) for i in idx)
        out[dst] += a[(Ellipsis,) + idx][(Ellipsis,) + pad] * b[src]
    return out


def _const(a: np.ndarray, ndim: int) -> np.ndarray:
    return a[(Ellipsis,) + (0,) * ndim]


def _with_const(value, box: tuple[int, ...]) -> np.ndarray:
    value = np.asarray(value, dtype=np.complex128)
    out = np.zeros(value.shape + box, dtype=np.complex128)
    out[(Ellipsis,) + (0,) * len(box)] = value
    return out


def reciprocal_coeffs(a: np.ndarray, ndim: int) -> np.ndarray:
    """Multiplicative inverse, filled in by increasing total degree.

    ``(a b)_t = 0`` for ``t > 0`` gives ``b_t = -(a b_{<t})_t / a_0``.  This is
    slower than a Newton iteration but does not lose digits in high orders
    the way ``b (2 - a b)`` does in floating point.
    """
    a0 = _const(a, ndim)
    if np.any(a0 == 0):
        raise SingularSeriesError("reciprocal of a series with zero constant term")
    box = a.shape[a.ndim - ndim :]
    inv0 = 1.0 / a0
    b = _with_const(inv0, box)
    if ndim == 0:
        return b
    deg = _degree_grid(box)
    inv0 = np.asarray(inv0)[(Ellipsis,) + (None,)]
    for t in range(1, int(deg.max()) + 1):
        level = deg == t
        prod = mul_coeffs(a, b, ndim)
        b[..., level] = -prod[..., level] * inv0
    return b


def exp_coeffs(a: np.ndarray, ndim: int) -> np.ndarray:
    """exp via the Euler-operator recurrence ``E b = (E a) b``.

    ``E = sum_i y_i d/dy_i`` multiplies a monomial by its total degree, so
    degree-``t`` coefficients of ``b`` only need lower-degree ones.
    """
    box = a.shape[a.ndim - ndim :]
    b = _with_const(np.exp(_const(a, ndim)), box)
    if ndim == 0:
        return b
    deg = _degree_grid(box)
    ea = a * deg
    for t in range(1, int(deg.max()) + 1):
        level = deg == t
        prod = mul_coeffs(ea, b, ndim)
        b[..., level] = prod[..., level] / t
    return b


def log_coeffs(a: np.ndarray, ndim: int) -> np.ndarray:
    """Principal logarithm; ``E log a = (E a) / a``."""
    a0 = _const(a, ndim)
    if np.any((a0.real <= 0) & (a0.imag == 0)):
        raise SingularSeriesError("log of a series whose constant term lies on (-inf, 0]")
    box = a.shape[a.ndim - ndim :]
    if ndim == 0:
        return np.log(a0).astype(np.complex128)
    deg = _degree_grid(box)
    q = mul_coeffs(a * deg, reciprocal_coeffs(a, ndim), ndim)
    out = np.zeros_like(q)
    nz = deg > 0
    out[..., nz] = q[..., nz] / deg[nz]
    out[(Ellipsis,) + (0,) * ndim] = np.log(a0)
    return out


def int_pow_coeffs(a: np.ndarray, e: int, ndim: int) -> np.ndarray:
    box = a.shape[a.ndim - ndim :]
    result = _with_const(np.ones(a.shape[: a.ndim - ndim]), box)
    base = a
    while e:
        if e & 1:
            result = mul_coeffs(result, base, ndim)
        e >>= 1
        if e:
            base = mul_coeffs(base, base, ndim)
    return result


def pow_coeffs(a: np.ndarray, e: float, ndim: int) -> np.ndarray:
    """``a ** e``; small non-negative integer powers by multiplication, else ``exp(e log a)``.

    Large or negative integer powers also go through the logarithm: repeated
    squaring of e.g. ``(1 + n - n y)`` builds huge alternating coefficients.
    """
    if float(e).is_integer() and 0 <= e <= 4:
        return int_pow_coeffs(a, int(e), ndim)
    a0 = _const(a, ndim)
    if float(e).is_integer() and np.any((a0.real <= 0) & (a0.imag == 0)):
        e = int(e)
        p = int_pow_coeffs(a, abs(e), ndim)
        return p if e >= 0 else reciprocal_coeffs(p, ndim)
    return exp_coeffs(e * log_coeffs(a, ndim), ndim)


# ----------------------------------------------------------------------------
# Series value type


class Series:
    """Immutable truncated power series.

    Supports ``+ - * /`` with other series of the same context and with
    plain numbers, unary minus and ``**`` with a real exponent.
    """

    __slots__ = ("ctx", "coeffs")
    __array_priority__ = 1000

    def __init__(self, ctx: SeriesContext, coeffs):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != ctx.shape:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match box {ctx.shape}")
        coeffs.flags.writeable = False
        self.ctx = ctx
        self.coeffs = coeffs

    # -- construction helpers
    @classmethod
    def _make(cls, ctx, coeffs):
        s = object.__new__(cls)
        coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
        coeffs.flags.writeable = False
        s.ctx = ctx
        s.coeffs = coeffs
        return s

    def _coerce(self, other) -> "Series":
        if isinstance(other, Series):
            if other.ctx != self.ctx:
                raise ContextMismatchError(f"{self.ctx} vs {other.ctx}")
            return other
        if isinstance(other, (Number, np.number)):
            return constant(self.ctx, other)
        return NotImplemented

    @property
    def ndim(self) -> int:
        return self.ctx.var_count

    @property
    def const(self) -> complex:
        return complex(self.coeffs.flat[0])

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Series._make(self.ctx, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Series._make(self.ctx, self.coeffs - other.coeffs)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Series._make(self.ctx, other.coeffs - self.coeffs)

    def __neg__(self):
        return Series._make(self.ctx, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (Number, np.number)):
            return Series._make(self.ctx, self.coeffs * other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Series._make(self.ctx, mul_coeffs(self.coeffs, other.coeffs, self.ndim))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (Number, np.number)):
            return Series._make(self.ctx, self.coeffs / other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * reciprocal(self)

    def __pow__(self, e):
        return pow_real(self, e)

    def __getitem__(self, k):
        return coefficient(self, k if isinstance(k, tuple) else (k,))

    def derivative(self, k) -> complex:
        """Mixed partial derivative ``d^k f / dy^k`` at the expansion point."""
        k = self.ctx.check_index(k)
        return coefficient(self, k) * math.prod(math.factorial(i) for i in k)

    def allclose(self, other, rtol=1e-12, atol=1e-14) -> bool:
        other = self._coerce(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))

    def __repr__(self):
        terms = []
        for idx in zip(*np.nonzero(self.coeffs)):
            terms.append(f"{tuple(int(i) for i in idx)}: {self.coeffs[idx]:.6g}")
        return f"Series(orders={self.ctx.orders}, {{{', '.join(terms)}}})"


def constant(ctx: SeriesContext, value) -> Series:
    return Series._make(ctx, _with_const(value, ctx.shape))


def variable(ctx: SeriesContext, i: int, base=0.0) -> Series:
    """The series ``base + y_i``."""
    if not 0 <= i < ctx.var_count:
        raise IndexError(f"variable index {i} out of range for {ctx.var_count} variables")
    c = _with_const(base, ctx.shape)
    if ctx.orders[i] >= 1:
        idx = [0] * ctx.var_count
        idx[i] = 1
        c[tuple(idx)] = 1.0
    return Series._make(ctx, c)


def coefficient(a: Series, k) -> complex:
    k = a.ctx.check_index(k)
    return complex(a.coeffs[k])


def reciprocal(a: Series) -> Series:
    return Series._make(a.ctx, reciprocal_coeffs(a.coeffs, a.ndim))


def exp(a: Series) -> Series:
    return Series._make(a.ctx, exp_coeffs(a.coeffs, a.ndim))


def log(a: Series) -> Series:
    return Series._make(a.ctx, log_coeffs(a.coeffs, a.ndim))


def pow_real(a: Series, e: float) -> Series:
    """``a**e``; exact repeated squaring for integer ``e``, principal branch otherwise."""
    return Series._make(a.ctx, pow_coeffs(a.coeffs, e, a.ndim))


def lift(a: Series, ctx: SeriesContext) -> Series:
    """Embed ``a`` into a context whose leading variables are ``a``'s variables."""
    if ctx.orders[: a.ndim] != a.ctx.orders:
        raise ContextMismatchError("target context does not extend the source context")
    out = np.zeros(ctx.shape, dtype=np.complex128)
    out[(Ellipsis,) + (0,) * (ctx.var_count - a.ndim)] = a.coeffs
    return Series._make(ctx, out)


def restrict(a: Series, ctx: SeriesContext, index) -> Series:
    """Coefficient of ``a`` at ``index`` in its trailing variables, as a series in ``ctx``."""
    index = tuple(index)
    if a.ctx.orders[: ctx.var_count] != ctx.orders or len(index) != a.ndim - ctx.var_count:
        raise ContextMismatchError("context does not prefix the series context")
    return Series._make(ctx, a.coeffs[(Ellipsis,) + index])
