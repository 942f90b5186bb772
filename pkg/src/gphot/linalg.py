"""LU factorisation, determinants and solves over real scalars or series.

Matrices are passed either as plain 2-D numpy arrays (real or complex
scalars) or as :class:`SeriesMatrix`, whose ``coeffs`` array has shape
``(rows, cols, *box)``.  Both go through the same elimination code; for plain
arrays the box is empty and the series product degenerates to ``*``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import (
    ContextMismatchError,
    Series,
    SeriesContext,
    mul_coeffs,
    reciprocal_coeffs,
)

__all__ = ["LU", "SeriesMatrix", "SingularMatrixError", "determinant", "lu_factor", "solve"]


class SingularMatrixError(ArithmeticError):
    pass


class SeriesMatrix:
    """Rectangular matrix with :class:`Series` entries sharing one context."""

    __slots__ = ("ctx", "coeffs")

    def __init__(self, ctx: SeriesContext, coeffs):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.ndim != 2 + ctx.var_count or coeffs.shape[2:] != ctx.shape:
            raise ValueError(f"coefficient array of shape {coeffs.shape} does not fit {ctx}")
        self.ctx = ctx
        self.coeffs = coeffs

    @classmethod
    def from_entries(cls, rows) -> "SeriesMatrix":
        rows = [list(r) for r in rows]
        ctx = next(e.ctx for r in rows for e in r if isinstance(e, Series))
        data = np.zeros((len(rows), len(rows[0])) + ctx.shape, dtype=np.complex128)
        for i, r in enumerate(rows):
            if len(r) != len(rows[0]):
                raise ValueError("ragged matrix")
            for j, e in enumerate(r):
                if isinstance(e, Series):
                    if e.ctx != ctx:
                        raise ContextMismatchError("entries from different contexts")
                    data[i, j] = e.coeffs
                else:
                    data[(i, j) + (0,) * ctx.var_count] = e
        return cls(ctx, data)

    @classmethod
    def from_constant(cls, ctx: SeriesContext, m) -> "SeriesMatrix":
        m = np.asarray(m)
        data = np.zeros(m.shape + ctx.shape, dtype=np.complex128)
        data[(Ellipsis,) + (0,) * ctx.var_count] = m
        return cls(ctx, data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[:2]

    def __getitem__(self, ij) -> Series:
        i, j = ij
        return Series(self.ctx, self.coeffs[i, j])

    def __matmul__(self, other: "SeriesMatrix") -> "SeriesMatrix":
        if other.ctx != self.ctx:
            raise ContextMismatchError("matrices from different contexts")
        nd = self.ctx.var_count
        prod = mul_coeffs(self.coeffs[:, :, None], other.coeffs[None, :, :], nd)
        return SeriesMatrix(self.ctx, prod.sum(axis=1))

    def constant_part(self) -> np.ndarray:
        return self.coeffs[(Ellipsis,) + (0,) * self.ctx.var_count]


@dataclass(frozen=True)
class LU:
    """``P @ m == L @ U`` with unit-diagonal ``L``; ``perm[i]`` is the source row of row ``i``."""

    lower: object
    upper: object
    perm: np.ndarray
    parity: int
    _packed: np.ndarray
    _ctx: SeriesContext | None

    @property
    def n(self) -> int:
        return self._packed.shape[0]


def _unpack(m):
    if isinstance(m, SeriesMatrix):
        return m.coeffs.copy(), m.ctx
    a = np.array(m, dtype=np.result_type(np.asarray(m).dtype, np.float64))
    if a.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return a, None


def _wrap(data, ctx):
    return data if ctx is None else SeriesMatrix(ctx, data)


def lu_factor(m) -> LU:
    """Doolittle LU with partial pivoting on the constant-term magnitude."""
    a, ctx = _unpack(m)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError(f"lu_factor needs a square matrix, got {a.shape[:2]}")
    nd = 0 if ctx is None else ctx.var_count
    c0 = (Ellipsis,) + (0,) * nd
    perm = np.arange(n)
    parity = 1
    scale = np.max(np.abs(a[c0])) if n else 0.0
    for k in range(n):
        col = np.abs(a[k:, k][c0])
        p = k + int(np.argmax(col))
        if col[p - k] == 0 or col[p - k] < 1e-14 * scale:
            raise SingularMatrixError(f"zero pivot (constant term) in column {k}")
        if p != k:
            a[[k, p]] = a[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            parity = -parity
        if k + 1 < n:
            inv = reciprocal_coeffs(a[k, k], nd) if nd else 1.0 / a[k, k]
            factors = mul_coeffs(a[k + 1 :, k], inv, nd)
            a[k + 1 :, k] = factors
            a[k + 1 :, k + 1 :] -= mul_coeffs(factors[:, None], a[k, k + 1 :][None, :], nd)
    lower = a.copy()
    upper = a.copy()
    tri_l = np.tril(np.ones((n, n), dtype=bool), -1)
    tri_u = np.triu(np.ones((n, n), dtype=bool))
    lower[~tri_l] = 0
    upper[~tri_u] = 0
    eye = np.eye(n, dtype=bool)
    lower[eye] = 0
    lower[(eye,) + (0,) * nd] = 1
    return LU(_wrap(lower, ctx), _wrap(upper, ctx), perm, parity, a, ctx)


def _as_lu(m) -> LU:
    return m if isinstance(m, LU) else lu_factor(m)


def determinant(m):
    """Determinant as a plain scalar or a :class:`Series`."""
    f = _as_lu(m)
    a, ctx = f._packed, f._ctx
    nd = 0 if ctx is None else ctx.var_count
    if ctx is None:
        return f.parity * np.prod(np.diagonal(a))
    det = np.zeros(ctx.shape, dtype=np.complex128)
    det[(0,) * nd] = f.parity
    for k in range(f.n):
        det = mul_coeffs(det, a[k, k], nd)
    return Series(ctx, det)


def solve(m, rhs):
    """Solve ``m @ x = rhs``; ``rhs`` may be a vector or a matrix (columns)."""
    f = _as_lu(m)
    a, ctx = f._packed, f._ctx
    nd = 0 if ctx is None else ctx.var_count
    if isinstance(rhs, SeriesMatrix):
        b, vector = rhs.coeffs.copy(), False
    elif isinstance(rhs, (list, tuple)) and rhs and isinstance(rhs[0], Series):
        b, vector = np.stack([r.coeffs for r in rhs])[:, None], True
    else:
        b = np.asarray(rhs)
        if ctx is not None and b.shape[b.ndim - nd :] != ctx.shape or b.ndim in (0,):
            raise ValueError("right-hand side does not match the series context")
        vector = b.ndim == 1 + nd
        if vector:
            b = b[:, None]
        b = b.astype(np.result_type(b.dtype, a.dtype), copy=True)
    n = f.n
    if b.shape[0] != n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {n}")
    b = b[f.perm]
    for k in range(n):
        if k + 1 < n:
            b[k + 1 :] -= mul_coeffs(a[k + 1 :, k][:, None], b[k][None], nd)
    for k in range(n - 1, -1, -1):
        if k + 1 < n:
            b[k] -= mul_coeffs(a[k, k + 1 :][:, None], b[k + 1 :], nd).sum(axis=0)
        inv = reciprocal_coeffs(a[k, k], nd) if nd else 1.0 / a[k, k]
        b[k] = mul_coeffs(b[k], inv, nd)
    if vector:
        b = b[:, 0]
        if ctx is None:
            return b
        return [Series(ctx, b[i]) for i in range(n)]
    return _wrap(b, ctx)
