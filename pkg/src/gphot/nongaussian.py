"""Photon-added and photon-subtracted Gaussian states.

``rho_-k = a^k rho a^dag^k / m_(k)`` and ``rho_+k = a^dag^k rho a^k / m^(k)``
per mode.  Their generating functions follow from the one of the underlying
Gaussian state: for subtraction it is ``(-1)^k / m_(k) d^k G / dw^k``; for
addition ``1 / m^(k) d^k / dr^k [G(w~) prod 1 / (1 - r (1 - w))]`` at ``r = 0``
with ``w~ = 1 - (1 - w) / (1 - r (1 - w))``.  The derivatives are taken with
auxiliary series variables appended to the caller's context, so the result
composes with every statistics family of :mod:`gphot.photon_statistics`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import photon_statistics as ps
from . import series as ser
from .gaussian import GaussianState
from .series import Series, SeriesContext

__all__ = ["ModifiedState", "modified_G", "modified_matrix_element", "modified_statistics", "normalize"]

KINDS = ("added", "subtracted")


@dataclass(frozen=True, eq=False)
class ModifiedState:
    base: GaussianState
    kind: str
    k: tuple
    norm: float

    @property
    def mode_count(self) -> int:
        return self.base.mode_count

    @property
    def copies(self) -> int:
        return 1

    def generating_function(self, w, u=None, v=None):
        return modified_G(self, w, u, v)


def normalize(base: GaussianState, kind: str, k) -> ModifiedState:
    """Attach the normalization ``m_(k)`` (subtracted) or ``m^(k)`` (added)."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if base.copies != 1:
        raise ValueError("photon addition/subtraction needs a state with copies = 1")
    k = tuple(int(x) for x in np.broadcast_to(k, (base.mode_count,)))
    if any(x < 0 for x in k):
        raise ValueError(f"photon counts must be >= 0, got {k}")
    active = [m for m in range(base.mode_count) if k[m] > 0]
    if not active:
        return ModifiedState(base, kind, k, 1.0)
    part = ps.DetectorPartition([ps.Detector([m]) for m in active])
    kk = [k[m] for m in active]
    if kind == "subtracted":
        norm = ps.falling_factorial(base, part, kk)
    else:
        norm = ps.rising_factorial(base, part, kk)
    if not norm > 1e-300:
        raise ValueError(f"normalization {norm:.3g} is not positive; the {kind} state does not exist")
    return ModifiedState(base, kind, k, float(norm))


def _context_of(*args):
    for a in args:
        if a is None:
            continue
        for x in a:
            if isinstance(x, Series):
                return x.ctx
    return None


def _lift_all(vals, ctx):
    if vals is None:
        return None
    return [ser.lift(x, ctx) if isinstance(x, Series) else ser.constant(ctx, x) for x in vals]


def modified_G(ms: ModifiedState, w, u=None, v=None):
    """``tr(rho_mod :exp(-sum w n):)`` (and ``u, v`` terms for subtraction)."""
    s = ms.mode_count
    if len(w) != s:
        raise ValueError(f"expected {s} arguments per mode")
    active = [m for m in range(s) if ms.k[m] > 0]
    if not active:
        return ps.eval_G(ms.base, w, u, v)
    if ms.kind == "added" and (u is not None or v is not None):
        raise NotImplementedError("photon-added generating function is only available for u = v = 0")
    ctx0 = _context_of(w, u, v)
    scalar = ctx0 is None
    if scalar:
        ctx0 = SeriesContext(())
    kk = tuple(ms.k[m] for m in active)
    ctx = ctx0.extend(kk)
    aux = {m: ser.variable(ctx, ctx0.var_count + i) for i, m in enumerate(active)}
    wl, ul, vl = _lift_all(w, ctx), _lift_all(u, ctx), _lift_all(v, ctx)
    if ms.kind == "subtracted":
        for m in active:
            wl[m] = wl[m] + aux[m]
        g = ps.eval_G(ms.base, wl, ul, vl)
        sign = (-1) ** sum(kk)
    else:
        pre = ser.constant(ctx, 1.0)
        for m in active:
            q = 1 - wl[m]
            den = 1 - aux[m] * q
            pre = pre / den
            wl[m] = 1 - q / den
        g = pre * ps.eval_G(ms.base, wl)
        sign = 1
    scale = sign * math.prod(math.factorial(x) for x in kk) / ms.norm
    out = ser.restrict(g, ctx0, kk) * scale
    return out.const if scalar else out


def modified_statistics(ms: ModifiedState, part: ps.DetectorPartition, family: str, orders, mu_ref=None):
    """Any statistics family for a modified state; same meaning as in :mod:`photon_statistics`."""
    dispatch = {
        "pnd": ps.pnd,
        "pnd_table": ps.pnd_table,
        "cumulative": ps.cumulative,
        "cumulative_table": ps.cumulative_table,
        "falling": ps.falling_factorial,
        "rising": ps.rising_factorial,
    }
    if family == "moments":
        return ps.moments(ms, part, orders, mu_ref)
    if family not in dispatch:
        raise ValueError(f"unknown statistics family {family!r}")
    return dispatch[family](ms, part, orders)


def modified_matrix_element(ms: ModifiedState, n, m) -> complex:
    """``<n| rho_mod |m>`` from shifted matrix elements of the Gaussian base."""
    s = ms.mode_count
    n = np.broadcast_to(np.asarray(n, dtype=int), (s,))
    m = np.broadcast_to(np.asarray(m, dtype=int), (s,))
    k = np.asarray(ms.k)
    if ms.kind == "subtracted":
        hi_n, hi_m, lo_n, lo_m = n + k, m + k, n, m
        elem = ps.fock_matrix_element(ms.base, hi_n, hi_m)
    else:
        if np.any(n < k) or np.any(m < k):
            return 0j
        hi_n, hi_m, lo_n, lo_m = n, m, n - k, m - k
        elem = ps.fock_matrix_element(ms.base, lo_n, lo_m)
    ratio = 1.0
    for a, b in zip(np.concatenate([hi_n, hi_m]), np.concatenate([lo_n, lo_m])):
        ratio *= math.prod(range(int(b) + 1, int(a) + 1))
    return elem * math.sqrt(ratio) / ms.norm
