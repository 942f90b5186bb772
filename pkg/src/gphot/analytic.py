"""Closed-form results for a few standard states, used as independent references."""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import hermite
from scipy import special, stats

__all__ = [
    "dst_generating_function",
    "displaced_squeezed_pnd",
    "multimode_spdc_pnd",
    "thermal_pnd",
    "tmsv_joint_pnd",
]


def dst_generating_function(w, alpha, r, theta, mu_th):
    """``<:exp(-w n):>`` of a displaced squeezed thermal state."""
    a2 = abs(alpha) ** 2
    c2, s2 = np.cosh(2 * r), np.sinh(2 * r)
    th = 1 + 2 * mu_th
    e = a2 * (w - 2 - w * th * c2) + w * th * np.real(alpha**2 * np.exp(-1j * theta)) * s2
    d = 1 - w + w**2 * (0.5 + mu_th + mu_th**2) - th * (w**2 / 2 - w) * c2
    return np.exp(w * e / (2 * d)) / np.sqrt(d)


def displaced_squeezed_pnd(n_max, alpha, r, theta) -> np.ndarray:
    """Photon-number distribution of ``D(alpha) S(r exp(i theta)) |0>`` via Hermite polynomials."""
    alpha = complex(alpha)
    t = np.tanh(r)
    pref = np.exp(-abs(alpha) ** 2 + np.real(alpha**2 * np.exp(-1j * theta)) * t)
    x = (alpha * np.exp(-0.5j * theta) * np.sinh(r) - alpha.conjugate() * np.exp(0.5j * theta) * np.cosh(r)) / (
        1j * np.sqrt(np.sinh(2 * r))
    )
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        c = np.zeros(n + 1)
        c[n] = 1
        h = hermite.hermval(x, c)
        out[n] = pref * t**n / (math.factorial(n) * 2**n * np.cosh(r)) * abs(h) ** 2
    return out


def thermal_pnd(n_max, mu) -> np.ndarray:
    n = np.arange(n_max + 1)
    return mu**n / (1 + mu) ** (n + 1)


def multimode_spdc_pnd(n_max, mu, m) -> np.ndarray:
    """Pair-number distribution of ``m`` equally strong two-mode squeezers with total mean ``mu``.

    Product of ``m`` geometric laws, i.e. negative binomial with success
    probability ``1 / (1 + mu / m)``.
    """
    return stats.nbinom.pmf(np.arange(n_max + 1), m, 1 / (1 + mu / m))


def tmsv_joint_pnd(n_max, r) -> np.ndarray:
    p = np.zeros((n_max + 1, n_max + 1))
    n = np.arange(n_max + 1)
    p[n, n] = np.tanh(r) ** (2 * n) / np.cosh(r) ** 2
    return p


def poisson_pnd(n_max, mu) -> np.ndarray:
    return stats.poisson.pmf(np.arange(n_max + 1), mu)


def log_factorial(n):
    return special.gammaln(np.asarray(n) + 1)
