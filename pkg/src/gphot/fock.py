"""Brute-force reference in a truncated number basis.

Only meant for cross-checking the generating-function engine on small
problems (up to three modes, cutoff up to 40).  States are density matrices
``rho[n_1..n_S, m_1..m_S]``; every object carries ``defect``, an upper bound
on the probability mass lost to truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, stats
from scipy.special import comb, gammaln

__all__ = [
    "FockState",
    "annihilate",
    "beamsplitter",
    "coherent",
    "create",
    "diagonal_pnd",
    "independent_sum",
    "loss",
    "oracle_pnd",
    "phase_shift",
    "squeezed",
    "tensor",
    "thermal",
    "tmsv",
]

MAX_MODES = 3
MAX_CUTOFF = 40


class CutoffError(ValueError):
    pass


@dataclass
class FockState:
    rho: np.ndarray
    defect: float = 0.0

    @property
    def modes(self) -> int:
        return self.rho.ndim // 2

    @property
    def cutoffs(self) -> tuple:
        return self.rho.shape[: self.modes]

    def diagonal(self) -> np.ndarray:
        c = self.cutoffs
        flat = self.rho.reshape(math.prod(c), math.prod(c))
        return np.real(np.diagonal(flat)).reshape(c)

    def trace(self) -> float:
        return float(self.diagonal().sum())

    def element(self, n, m) -> complex:
        return complex(self.rho[tuple(n) + tuple(m)])


def _check_cutoff(cutoff):
    if not 1 <= cutoff <= MAX_CUTOFF:
        raise CutoffError(f"cutoff must lie in [1, {MAX_CUTOFF}], got {cutoff}")


def _pure(amps, defect):
    amps = np.asarray(amps, dtype=complex)
    return FockState(np.multiply.outer(amps, amps.conj()), defect)


def _require(defect, tol):
    if defect > tol:
        raise CutoffError(f"truncated mass {defect:.3g} exceeds {tol:.1g}; raise the cutoff")


def thermal(mu, cutoff, tol=1e-10) -> FockState:
    _check_cutoff(cutoff)
    n = np.arange(cutoff)
    p = mu**n / (1 + mu) ** (n + 1)
    defect = (mu / (1 + mu)) ** cutoff
    _require(defect, tol)
    return FockState(np.diag(p).astype(complex), defect)


def coherent(alpha, cutoff, tol=1e-10) -> FockState:
    _check_cutoff(cutoff)
    n = np.arange(cutoff)
    amps = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(complex(alpha) + (alpha == 0)) - gammaln(n + 1) / 2)
    if alpha == 0:
        amps = (n == 0).astype(complex)
    defect = max(0.0, 1 - float(np.sum(np.abs(amps) ** 2)))
    _require(defect, tol)
    return _pure(amps, defect)


def squeezed(r, theta, cutoff, tol=1e-10) -> FockState:
    """``exp[(chi a^dag^2 - chi^* a^2) / 2] |0>`` with ``chi = r exp(i theta)``."""
    _check_cutoff(cutoff)
    amps = np.zeros(cutoff, dtype=complex)
    q = np.exp(1j * theta) * np.tanh(r)
    for k in range(0, (cutoff + 1) // 2):
        amps[2 * k] = q**k * math.sqrt(math.factorial(2 * k)) / (2**k * math.factorial(k))
    amps /= math.sqrt(np.cosh(r))
    defect = max(0.0, 1 - float(np.sum(np.abs(amps) ** 2)))
    _require(defect, tol)
    return _pure(amps, defect)


def tmsv(r, cutoff, theta=0.0, tol=1e-10) -> FockState:
    _check_cutoff(cutoff)
    n = np.arange(cutoff)
    amps = np.zeros((cutoff, cutoff), dtype=complex)
    amps[n, n] = (np.exp(1j * theta) * np.tanh(r)) ** n / np.cosh(r)
    defect = np.tanh(r) ** (2 * cutoff)
    _require(defect, tol)
    return _pure(amps, defect)


def tensor(a: FockState, b: FockState) -> FockState:
    sa, sb = a.modes, b.modes
    if sa + sb > MAX_MODES:
        raise ValueError(f"oracle is limited to {MAX_MODES} modes")
    rho = np.multiply.outer(a.rho, b.rho)
    order = list(range(sa)) + list(range(2 * sa, 2 * sa + sb)) + list(range(sa, 2 * sa)) + list(range(2 * sa + sb, 2 * (sa + sb)))
    return FockState(np.transpose(rho, order), a.defect + b.defect)


def _apply_mode_op(st: FockState, op: np.ndarray, i: int, defect=0.0) -> FockState:
    """``rho -> O rho O^dag`` for a single-mode operator matrix ``O[out, in]``."""
    s = st.modes
    rho = np.moveaxis(np.tensordot(op, st.rho, axes=(1, i)), 0, i)
    rho = np.moveaxis(np.tensordot(op.conj(), rho, axes=(1, s + i)), 0, s + i)
    return FockState(rho, st.defect + defect)


def phase_shift(st: FockState, phi, i) -> FockState:
    c = st.cutoffs[i]
    return _apply_mode_op(st, np.diag(np.exp(-1j * phi * np.arange(c))), i)


def annihilate(st: FockState, i) -> FockState:
    c = st.cutoffs[i]
    return _apply_mode_op(st, np.diag(np.sqrt(np.arange(1, c)), 1), i)


def create(st: FockState, i) -> FockState:
    """``a^dag rho a``; the top level is pushed out of the box and counted as defect."""
    c = st.cutoffs[i]
    top = np.take(st.diagonal(), c - 1, axis=i).sum() * c
    return _apply_mode_op(st, np.diag(np.sqrt(np.arange(1, c)), -1), i, defect=float(top))


def loss(st: FockState, T, i) -> FockState:
    """Pure-loss channel via its Kraus operators (exact on the truncated box)."""
    if not 0 <= T <= 1:
        raise ValueError("transmission must lie in [0, 1]")
    c = st.cutoffs[i]
    out = None
    n = np.arange(c)
    for k in range(c):
        e = np.zeros((c, c))
        nn = n[k:]
        e[nn - k, nn] = np.sqrt(comb(nn, k) * T ** (nn - k) * (1 - T) ** k)
        term = _apply_mode_op(st, e, i).rho
        out = term if out is None else out + term
    return FockState(out, st.defect)


def _bs_matrix(T, c):
    """Two-mode unitary in the ``|a, b>`` basis: ``a^dag -> t a^dag - r b^dag``, ``b^dag -> r a^dag + t b^dag``."""
    t, r = math.sqrt(T), math.sqrt(1 - T)
    u = np.zeros((c, c, c, c))
    for n in range(c):
        for m in range(c):
            norm = 1 / math.sqrt(math.factorial(n) * math.factorial(m))
            for p in range(n + 1):
                for q in range(m + 1):
                    a, b = p + q, n - p + m - q
                    if a >= c or b >= c:
                        continue
                    coef = comb(n, p) * comb(m, q) * t**p * (-r) ** (n - p) * r**q * t ** (m - q)
                    u[a, b, n, m] += coef * norm * math.sqrt(math.factorial(a) * math.factorial(b))
    return u


def beamsplitter(st: FockState, T, i, j) -> FockState:
    """Exact beam splitter; amplitude leaving the box is added to ``defect``."""
    s = st.modes
    c = st.cutoffs[i]
    if st.cutoffs[j] != c:
        raise ValueError("beam splitter modes need equal cutoffs")
    u = _bs_matrix(T, c)
    before = st.trace()
    rho = np.tensordot(u, st.rho, axes=([2, 3], [i, j]))
    rho = np.moveaxis(rho, [0, 1], [i, j])
    rho = np.tensordot(u.conj(), rho, axes=([2, 3], [s + i, s + j]))
    rho = np.moveaxis(rho, [0, 1], [s + i, s + j])
    out = FockState(rho, st.defect)
    out.defect += max(0.0, before - out.trace())
    return out


def _thin(p: np.ndarray, eta: float, axis: int) -> np.ndarray:
    c = p.shape[axis]
    n = np.arange(c)
    kernel = stats.binom.pmf(n[None, :], n[:, None], eta)  # [n_in, k_out]
    return np.moveaxis(np.tensordot(p, kernel, axes=(axis, 0)), -1, axis)


def oracle_pnd(st: FockState, detectors, n_max):
    """Joint detector distribution on ``0..n_max[d]`` and a bound on the missing mass.

    ``detectors`` is a list of ``(modes, efficiencies, noise)``; modes not
    listed are summed over.  Efficiency acts by binomial thinning, noise by
    convolution with a Poisson law.
    """
    return diagonal_pnd(st.diagonal(), detectors, n_max), st.defect


def diagonal_pnd(p: np.ndarray, detectors, n_max) -> np.ndarray:
    """:func:`oracle_pnd` starting from a joint number distribution ``p[n_1, ..., n_S]``."""
    for modes, eta, _ in detectors:
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (len(modes),))
        for m, e in zip(modes, eta):
            p = _thin(p, e, m)
    n_max = np.broadcast_to(np.asarray(n_max, dtype=int), (len(detectors),))
    out = np.zeros(tuple(int(k) + 1 for k in n_max))
    grids = np.indices(p.shape)
    totals = [sum(grids[m] for m in modes) for modes, _, _ in detectors]
    inside = np.ones(p.shape, dtype=bool)
    for t, k in zip(totals, n_max):
        inside &= t <= k
    idx = tuple(t[inside] for t in totals)
    np.add.at(out, idx, p[inside])
    for d, (_, _, nu) in enumerate(detectors):
        if nu > 0:
            k = np.arange(out.shape[d])
            pois = stats.poisson.pmf(k, nu)
            conv = np.zeros_like(out)
            for shift in range(out.shape[d]):
                src = np.take(out, np.arange(out.shape[d] - shift), axis=d)
                sl = [slice(None)] * out.ndim
                sl[d] = slice(shift, None)
                conv[tuple(sl)] += pois[shift] * src
            out = conv
    return out


def independent_sum(p: np.ndarray, copies: int) -> np.ndarray:
    """Distribution of the sum of ``copies`` independent draws from ``p`` (any dimension)."""
    out = p
    for _ in range(copies - 1):
        full = signal.convolve(out, p, method="direct")
        out = full[tuple(slice(0, n) for n in p.shape)]
    return out
