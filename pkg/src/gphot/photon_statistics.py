"""Photon statistics of Gaussian states from their generating function.

The central object is

    G(u, v, w) = [exp(-z^T Lambda^{-1} W z / 2 + Z) / sqrt(det Lambda)]^K

with ``W = diag(w) + diag(w)`` (x and p blocks), ``Lambda = I + W (gamma - I) / 2``,
``z = d + zeta``, ``zeta = (-(u + v), i (v - u)) / (w sqrt 2)`` and
``Z = sum(u v / w)``.  ``K`` is the copy multiplicity of the state.  With
``u = v = 0`` this is ``<:exp(-sum_s w_s n_s):>``, so substituting a function
of formal variables ``y_d`` for ``w`` and reading off series coefficients
gives probabilities, cumulative probabilities, moments and factorial moments
of the counts registered by a set of detectors.  Non-zero ``u, v`` give
density-matrix elements.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import series as ser
from .gaussian import GaussianState, keep
from .linalg import SeriesMatrix, determinant, lu_factor, solve
from .series import Series, SeriesContext, mul_coeffs

__all__ = [
    "Detector",
    "DetectorPartition",
    "NegativeProbabilityError",
    "coherent_matrix_element",
    "cumulative",
    "cumulative_table",
    "eval_G",
    "falling_factorial",
    "fock_matrix_element",
    "mean",
    "moments",
    "pnd",
    "pnd_table",
    "rising_factorial",
    "statistics_series",
]

log = logging.getLogger(__name__)

IMAG_RTOL = 1e-10
IMAG_ATOL = 1e-14
NEG_TOL = 1e-12


class NegativeProbabilityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Detector:
    """A detector registering the summed photon number of ``modes``.

    ``efficiency`` is a scalar or one value per mode; ``noise`` is the mean of
    an independent Poissonian count added to the detected photons.
    """

    modes: tuple
    efficiency: object = 1.0
    noise: float = 0.0

    def __post_init__(self):
        modes = tuple(int(m) for m in np.atleast_1d(self.modes))
        if not modes:
            raise ValueError("detector without modes")
        if len(set(modes)) != len(modes):
            raise ValueError(f"detector lists a mode twice: {modes}")
        eta = np.broadcast_to(np.asarray(self.efficiency, dtype=float), (len(modes),))
        if np.any((eta < 0) | (eta > 1)):
            raise ValueError(f"efficiencies must lie in [0, 1], got {eta}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "efficiency", tuple(float(e) for e in eta))
        object.__setattr__(self, "noise", float(self.noise))


@dataclass(frozen=True)
class DetectorPartition:
    detectors: tuple

    def __init__(self, detectors):
        dets = tuple(d if isinstance(d, Detector) else Detector(*d) for d in detectors)
        if not dets:
            raise ValueError("partition without detectors")
        seen = set()
        for det in dets:
            if seen & set(det.modes):
                raise ValueError(f"modes {sorted(seen & set(det.modes))} assigned to two detectors")
            seen |= set(det.modes)
        object.__setattr__(self, "detectors", dets)

    @classmethod
    def single(cls, modes, efficiency=1.0, noise=0.0) -> "DetectorPartition":
        return cls([Detector(modes, efficiency, noise)])

    def __len__(self):
        return len(self.detectors)

    @property
    def modes(self) -> tuple:
        return tuple(m for det in self.detectors for m in det.modes)

    @property
    def noise(self) -> np.ndarray:
        return np.array([det.noise for det in self.detectors])


# ----------------------------------------------------------------------------
# generating function


def _g_real(gamma, d, w, u, v, copies):
    """Scalar evaluation; ``w, u, v`` are length-S numeric vectors (u, v may be None)."""
    n = d.shape[0]
    w2 = np.concatenate([w, w])
    lam = np.eye(n) + w2[:, None] * (gamma - np.eye(n)) / 2
    dtype = complex if np.iscomplexobj(lam) or u is not None else float
    z = d.astype(dtype)
    big_z = 0.0
    if u is not None:
        zeta = np.concatenate([-(u + v), 1j * (v - u)]) / (np.sqrt(2) * w2)
        z = z + zeta
        big_z = np.sum(u * v / w)
    f = lu_factor(lam)
    det = determinant(f)
    expo = big_z
    if np.any(z != 0):
        expo = expo - z @ solve(f, w2 * z) / 2
    if dtype is float and det > 0:
        return float(np.exp(copies * expo) * det ** (-copies / 2))
    return complex(np.exp(copies * expo) * complex(det) ** (-copies / 2))


def _as_coeffs(vals, ctx, size):
    """Stack numbers / Series into a (size, *box) coefficient array."""
    out = np.zeros((size,) + ctx.shape, dtype=np.complex128)
    zero = (0,) * ctx.var_count
    for i, x in enumerate(vals):
        if isinstance(x, Series):
            if x.ctx != ctx:
                raise ser.ContextMismatchError("arguments from different contexts")
            out[i] = x.coeffs
        else:
            out[(i,) + zero] = x
    return out


def _g_series(gamma, d, w, u, v, copies, ctx):
    nd = ctx.var_count
    n = d.shape[0]
    s = n // 2
    zero = (0,) * nd
    wc = _as_coeffs(w, ctx, s)
    w2 = np.concatenate([wc, wc])
    half = (gamma - np.eye(n)) / 2
    lam = half[(...,) + (None,) * nd] * w2[:, None]
    lam[(np.arange(n), np.arange(n)) + zero] += 1
    f = lu_factor(SeriesMatrix(ctx, lam))
    det = determinant(f)
    z = np.zeros((n,) + ctx.shape, dtype=np.complex128)
    z[(slice(None),) + zero] = d
    expo = np.zeros(ctx.shape, dtype=np.complex128)
    if u is not None:
        uc, vc = _as_coeffs(u, ctx, s), _as_coeffs(v, ctx, s)
        winv = ser.reciprocal_coeffs(wc, nd)
        z[:s] -= mul_coeffs(uc + vc, winv, nd) / np.sqrt(2)
        z[s:] += 1j * mul_coeffs(vc - uc, winv, nd) / np.sqrt(2)
        expo += mul_coeffs(mul_coeffs(uc, vc, nd), winv, nd).sum(axis=0)
    if np.any(z != 0):
        x = solve(f, SeriesMatrix(ctx, mul_coeffs(w2, z, nd)[:, None])).coeffs[:, 0]
        expo -= mul_coeffs(z, x, nd).sum(axis=0) / 2
    out = ser.pow_coeffs(det.coeffs, -copies / 2, nd)
    if np.any(expo != 0):
        out = mul_coeffs(out, ser.exp_coeffs(copies * expo, nd), nd)
    return Series(ctx, out)


def eval_G(state, w, u=None, v=None):
    """Generating function of ``state`` at per-mode arguments ``w`` (and ``u, v``).

    Arguments may be numbers or :class:`Series` of one context.  Returns a
    Series if any argument is one, a Python scalar otherwise.  ``u = v = None``
    means both vanish; the ``1/w`` terms are then never formed.
    """
    if not isinstance(state, GaussianState):
        return state.generating_function(w, u, v)
    s = state.mode_count
    args = [w] + ([u, v] if u is not None or v is not None else [])
    for a in args:
        if a is None or len(a) != s:
            raise ValueError(f"expected {s} arguments per mode")
    if u is not None and v is None or v is not None and u is None:
        raise ValueError("u and v must be given together")
    ctx = next((x.ctx for a in args for x in a if isinstance(x, Series)), None)
    if ctx is None:
        w = np.asarray(w)
        if u is not None:
            u, v = np.asarray(u, dtype=complex), np.asarray(v, dtype=complex)
        return _g_real(state.gamma, state.d, w, u, v, state.copies)
    return _g_series(state.gamma, state.d, w, u, v, state.copies, ctx)


# ----------------------------------------------------------------------------
# statistics families


def _check_modes(state, part: DetectorPartition):
    s = state.mode_count
    bad = [m for m in part.modes if not 0 <= m < s]
    if bad:
        raise IndexError(f"detector modes {bad} not in a {s}-mode state")


def _marginal_G(state, part: DetectorPartition, w_of_det):
    """G with detector-dependent ``w``; unlisted modes are marginalized."""
    _check_modes(state, part)
    w_mode = {}
    for det, wd in zip(part.detectors, w_of_det):
        for m, eta in zip(det.modes, det.efficiency):
            w_mode[m] = wd * eta
    if isinstance(state, GaussianState):
        modes = list(part.modes)
        return eval_G(keep(state, modes), [w_mode[m] for m in modes])
    # non-Gaussian states: w = 0 on a mode is the partial trace
    return eval_G(state, [w_mode.get(m, 0.0) for m in range(state.mode_count)])


FAMILIES = ("pnd", "cumulative", "moments", "falling", "rising")


def statistics_series(state, part: DetectorPartition, orders, family: str = "pnd", mu_ref=None) -> Series:
    """Series in ``y_1..y_D`` whose box encodes one statistics family.

    ``pnd`` and ``cumulative`` give probabilities as plain coefficients; the
    moment families give them as derivatives (``k! * coeff``).
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown statistics family {family!r}")
    orders = tuple(int(o) for o in np.broadcast_to(orders, (len(part),)))
    if any(o < 0 for o in orders):
        raise ValueError(f"orders must be >= 0, got {orders}")
    ctx = SeriesContext(orders)
    ys = [ser.variable(ctx, i) for i in range(len(part))]
    nu = part.noise
    mu_ref = np.zeros(len(part)) if mu_ref is None else np.broadcast_to(np.asarray(mu_ref, float), (len(part),))
    if family in ("pnd", "cumulative"):
        ws = [1 - y for y in ys]
        pre = ser.exp(sum((y - 1) * n for y, n in zip(ys, nu)))
        if family == "cumulative":
            for y in ys:
                pre = pre / (1 - y)
    elif family == "moments":
        ey = [ser.exp(y) for y in ys]
        ws = [1 - e for e in ey]
        pre = ser.exp(sum((e - 1) * n - m * y for e, y, n, m in zip(ey, ys, nu, mu_ref)))
    elif family == "falling":
        ws = [-y for y in ys]
        pre = ser.exp(sum(y * n for y, n in zip(ys, nu)))
    else:
        ws = [y / (y - 1) for y in ys]
        pre = ser.exp(sum(y * (n / (1 - y)) for y, n in zip(ys, nu)))
        for y in ys:
            pre = pre / (1 - y)
    return pre * _marginal_G(state, part, ws)


def _real(value: complex, what: str, probability: bool = False) -> float:
    value = complex(value)
    if abs(value.imag) > IMAG_RTOL * abs(value.real) + IMAG_ATOL:
        raise ArithmeticError(f"{what} has a non-negligible imaginary part {value}")
    x = value.real
    if probability and x < 0:
        if x < -NEG_TOL:
            raise NegativeProbabilityError(f"{what} = {x:.3g} is negative")
        log.debug("clamping %s = %.3g to 0", what, x)
        x = 0.0
    return x


def _real_table(arr, what, probability):
    arr = np.asarray(arr)
    bad = np.abs(arr.imag) > IMAG_RTOL * np.abs(arr.real) + IMAG_ATOL
    if np.any(bad):
        raise ArithmeticError(f"{what} has non-negligible imaginary parts (max {np.max(np.abs(arr.imag)):.3g})")
    out = arr.real.copy()
    if probability:
        if np.any(out < -NEG_TOL):
            raise NegativeProbabilityError(f"{what} has negative entries down to {out.min():.3g}")
        if np.any(out < 0):
            log.debug("clamping %d tiny negative entries of %s", int(np.sum(out < 0)), what)
        out[out < 0] = 0.0
    return out


def _index(part, n):
    n = tuple(int(k) for k in np.broadcast_to(n, (len(part),)))
    if any(k < 0 for k in n):
        raise ValueError(f"photon numbers must be >= 0, got {n}")
    return n


def pnd(state, part: DetectorPartition, n) -> float:
    """Joint probability to register ``n[d]`` counts in detector ``d``."""
    n = _index(part, n)
    return _real(statistics_series(state, part, n, "pnd")[n], f"p{n}", probability=True)


def pnd_table(state, part: DetectorPartition, n_max) -> np.ndarray:
    """All probabilities with ``n[d] <= n_max[d]`` from a single series evaluation."""
    n_max = _index(part, n_max)
    return _real_table(statistics_series(state, part, n_max, "pnd").coeffs, "PND table", True)


def cumulative(state, part: DetectorPartition, n) -> float:
    """``P(N_d <= n_d for all d)``."""
    n = _index(part, n)
    return _real(statistics_series(state, part, n, "cumulative")[n], f"P(N<={n})", probability=True)


def cumulative_table(state, part: DetectorPartition, n_max) -> np.ndarray:
    n_max = _index(part, n_max)
    return _real_table(statistics_series(state, part, n_max, "cumulative").coeffs, "cumulative table", True)


def _derivative_table(sr: Series) -> np.ndarray:
    fact = np.ones(sr.ctx.shape)
    for axis, o in enumerate(sr.ctx.orders):
        f = np.array([math.factorial(k) for k in range(o + 1)], dtype=float)
        shape = [1] * sr.ndim
        shape[axis] = o + 1
        fact = fact * f.reshape(shape)
    return sr.coeffs * fact


def moments(state, part: DetectorPartition, k, mu_ref=None, table=False):
    """``<prod_d (N_d - mu_ref[d])**k[d]>`` including efficiency and noise.

    With ``table=True`` the whole array of moments up to order ``k`` is returned.
    """
    k = _index(part, k)
    sr = statistics_series(state, part, k, "moments", mu_ref)
    if table:
        return _real_table(_derivative_table(sr), "moments", False)
    return _real(sr.derivative(k), f"moment {k}")


def mean(state, part: DetectorPartition) -> np.ndarray:
    out = []
    for i in range(len(part)):
        k = [0] * len(part)
        k[i] = 1
        out.append(moments(state, part, k))
    return np.array(out)


def falling_factorial(state, part: DetectorPartition, k, table=False):
    """``<prod_d N_d (N_d - 1) ... (N_d - k_d + 1)>``."""
    k = _index(part, k)
    sr = statistics_series(state, part, k, "falling")
    if table:
        return _real_table(_derivative_table(sr), "falling factorial moments", False)
    return _real(sr.derivative(k), f"falling factorial moment {k}")


def rising_factorial(state, part: DetectorPartition, k, table=False):
    """``<prod_d (N_d + 1) (N_d + 2) ... (N_d + k_d)>``, i.e. ``<a^k a^dag^k>`` without noise."""
    k = _index(part, k)
    sr = statistics_series(state, part, k, "rising")
    if table:
        return _real_table(_derivative_table(sr), "rising factorial moments", False)
    return _real(sr.derivative(k), f"rising factorial moment {k}")


# ----------------------------------------------------------------------------
# density-matrix elements


def coherent_matrix_element(state, alpha: Sequence[complex], beta: Sequence[complex]) -> complex:
    """``<alpha| rho |beta>`` for multimode coherent states."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    beta = np.atleast_1d(np.asarray(beta, dtype=complex))
    s = state.mode_count
    if alpha.shape != (s,) or beta.shape != (s,):
        raise ValueError(f"need {s} coherent amplitudes per side")
    g = eval_G(state, np.ones(s), alpha.conj(), beta)
    return complex(np.exp(-(np.sum(np.abs(alpha) ** 2) + np.sum(np.abs(beta) ** 2)) / 2) * g)


def fock_matrix_element(state, n, m) -> complex:
    """``<n| rho |m>`` in the multimode number basis.

    Only ``min(n_s, m_s)`` derivatives in ``w_s`` plus ``|n_s - m_s|`` in one of
    ``u_s, v_s`` are taken, so elements near the diagonal are cheap.
    """
    s = state.mode_count
    n = np.broadcast_to(np.asarray(n, dtype=int), (s,))
    m = np.broadcast_to(np.asarray(m, dtype=int), (s,))
    if np.any(n < 0) or np.any(m < 0):
        raise ValueError("photon numbers must be >= 0")
    l = np.minimum(n, m)
    dn, dm = n - l, m - l
    orders, slots = [], []
    for kind, arr in (("w", l), ("u", dn), ("v", dm)):
        for mode in range(s):
            if arr[mode] > 0:
                slots.append((kind, mode))
                orders.append(int(arr[mode]))
    scale = (-1) ** int(l.sum()) / math.sqrt(
        math.prod(math.factorial(int(a)) for a in n) * math.prod(math.factorial(int(b)) for b in m)
    )
    if not orders:
        return complex(scale * eval_G(state, np.ones(s)))
    ctx = SeriesContext(orders)
    w = [1.0] * s
    u = [0.0] * s
    v = [0.0] * s
    for i, (kind, mode) in enumerate(slots):
        {"w": w, "u": u, "v": v}[kind][mode] = ser.variable(ctx, i, 1.0 if kind == "w" else 0.0)
    if dn.any() or dm.any():
        g = eval_G(state, w, u, v)
    else:
        g = eval_G(state, w)
    return complex(scale * g.derivative(tuple(orders)))
