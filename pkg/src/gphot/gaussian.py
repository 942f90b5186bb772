"""Gaussian states in the covariance formalism.

Quadratures are ordered ``(x_1, ..., x_S, p_1, ..., p_S)`` and scaled so that
the vacuum has covariance ``I`` and a coherent state ``|alpha>`` has
displacement ``sqrt(2) * (Re alpha, Im alpha)``.  Under a symplectic map
``S`` with shift ``c`` the moments transform as ``gamma -> S gamma S^T`` and
``d -> S d + c``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GaussianState",
    "SymplecticOp",
    "apply",
    "beamsplitter",
    "coherent",
    "displaced_squeezed_thermal",
    "displacement",
    "keep",
    "loss_channel",
    "phase_shift",
    "squeezed",
    "squeezer",
    "symplectic_form",
    "tensor",
    "thermal",
    "tmsv",
    "trace_out",
    "two_mode_squeezer",
    "vacuum",
]

SYM_TOL = 1e-12


def symplectic_form(n_modes: int) -> np.ndarray:
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Covariance ``gamma``, displacement ``d`` and a copy multiplicity.

    ``copies`` counts identical independent replicas of the whole state that
    share the detector assignment (e.g. Schmidt modes of a broadband source).
    Transformations act on one replica and are implicitly repeated.
    """

    gamma: np.ndarray
    d: np.ndarray
    copies: int = 1

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float)
        d = np.array(self.d, dtype=float).reshape(-1)
        n = d.shape[0]
        if n == 0 or n % 2 or gamma.shape != (n, n):
            raise ValueError(f"inconsistent shapes gamma {gamma.shape}, d {d.shape}")
        if int(self.copies) != self.copies or self.copies < 1:
            raise ValueError(f"copies must be a positive integer, got {self.copies}")
        asym = np.max(np.abs(gamma - gamma.T))
        if asym > SYM_TOL * max(1.0, np.max(np.abs(gamma))):
            raise ValueError(f"covariance matrix not symmetric (max deviation {asym:.3g})")
        gamma = 0.5 * (gamma + gamma.T)
        try:
            np.linalg.cholesky(gamma)
        except np.linalg.LinAlgError:
            raise ValueError("covariance matrix is not positive definite") from None
        gamma.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "copies", int(self.copies))

    @property
    def mode_count(self) -> int:
        return self.d.shape[0] // 2

    def quad_index(self, modes) -> np.ndarray:
        """Rows of ``gamma`` belonging to ``modes`` (x block first, then p block)."""
        modes = np.asarray(modes, dtype=int)
        return np.concatenate([modes, modes + self.mode_count])

    def mode_block(self, i: int) -> np.ndarray:
        idx = self.quad_index([i])
        return self.gamma[np.ix_(idx, idx)]

    def mean_photons(self) -> np.ndarray:
        """Mean photon number per mode of a single copy."""
        s = self.mode_count
        g = np.diagonal(self.gamma)
        return (g[:s] + g[s:] - 2) / 4 + (self.d[:s] ** 2 + self.d[s:] ** 2) / 2

    def with_copies(self, copies: int) -> "GaussianState":
        return GaussianState(self.gamma, self.d, copies)

    def allclose(self, other: "GaussianState", atol=1e-12) -> bool:
        return (
            self.copies == other.copies
            and self.gamma.shape == other.gamma.shape
            and np.allclose(self.gamma, other.gamma, rtol=0, atol=atol)
            and np.allclose(self.d, other.d, rtol=0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class SymplecticOp:
    matrix: np.ndarray
    shift: np.ndarray | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        n = m.shape[0]
        if m.ndim != 2 or m.shape != (n, n) or n % 2:
            raise ValueError(f"symplectic matrix must be 2S x 2S, got {m.shape}")
        shift = np.zeros(n) if self.shift is None else np.array(self.shift, dtype=float)
        if shift.shape != (n,):
            raise ValueError("shift has the wrong length")
        j = symplectic_form(n // 2)
        err = np.max(np.abs(m.T @ j @ m - j))
        if err > 1e-10:
            raise ValueError(f"matrix is not symplectic (deviation {err:.3g})")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "shift", shift)

    @property
    def mode_count(self) -> int:
        return self.matrix.shape[0] // 2

    def __matmul__(self, other: "SymplecticOp") -> "SymplecticOp":
        """Composition: ``(a @ b)`` applies ``b`` first."""
        return SymplecticOp(self.matrix @ other.matrix, self.matrix @ other.shift + self.shift)

    def inverse(self) -> "SymplecticOp":
        j = symplectic_form(self.mode_count)
        inv = -j @ self.matrix.T @ j
        return SymplecticOp(inv, -inv @ self.shift)


def _check_mode(i, n_modes):
    if not 0 <= i < n_modes:
        raise IndexError(f"mode {i} out of range for {n_modes} modes")


def _embed(blocks: dict, n_modes: int) -> np.ndarray:
    """Place 2x2 (x, p) blocks ``{(i, j): b}`` coupling mode i (row) to mode j."""
    m = np.eye(2 * n_modes)
    for (i, j), b in blocks.items():
        _check_mode(i, n_modes)
        _check_mode(j, n_modes)
        m[i, j], m[i, n_modes + j] = b[0]
        m[n_modes + i, j], m[n_modes + i, n_modes + j] = b[1]
    return m


# ----------------------------------------------------------------------------
# constructors


def vacuum(n_modes: int = 1, copies: int = 1) -> GaussianState:
    if n_modes < 1:
        raise ValueError("need at least one mode")
    return GaussianState(np.eye(2 * n_modes), np.zeros(2 * n_modes), copies)


def _sq_block(r, theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.cosh(2 * r) * np.eye(2) + np.sinh(2 * r) * np.array([[c, s], [s, -c]])


def displaced_squeezed_thermal(alpha=0.0, r=0.0, theta=0.0, mu_th=0.0, copies=1) -> GaussianState:
    if mu_th < 0:
        raise ValueError(f"thermal photon number must be >= 0, got {mu_th}")
    if r < 0:
        raise ValueError(f"squeezing must be >= 0, got {r}")
    alpha = complex(alpha)
    gamma = (1 + 2 * mu_th) * _sq_block(r, theta)
    d = np.sqrt(2) * np.array([alpha.real, alpha.imag])
    return GaussianState(gamma, d, copies)


def thermal(mu_th, copies=1) -> GaussianState:
    return displaced_squeezed_thermal(mu_th=mu_th, copies=copies)


def coherent(alpha, copies=1) -> GaussianState:
    return displaced_squeezed_thermal(alpha=alpha, copies=copies)


def squeezed(r, theta=0.0, copies=1) -> GaussianState:
    return displaced_squeezed_thermal(r=r, theta=theta, copies=copies)


def tmsv(r, theta=0.0, copies=1) -> GaussianState:
    """Two-mode squeezed vacuum, mean photon number ``sinh(r)**2`` per arm."""
    if r < 0:
        raise ValueError(f"squeezing must be >= 0, got {r}")
    return apply(two_mode_squeezer(r, theta, 0, 1, 2), vacuum(2, copies))


def tensor(*states: GaussianState) -> GaussianState:
    """Tensor product; mode indices of later factors follow the earlier ones."""
    if not states:
        raise ValueError("tensor of nothing")
    copies = {s.copies for s in states}
    if len(copies) != 1:
        raise ValueError(f"cannot tensor states with different copy counts {sorted(copies)}")
    total = sum(s.mode_count for s in states)
    gamma = np.zeros((2 * total, 2 * total))
    d = np.zeros(2 * total)
    offset = 0
    for s in states:
        n = s.mode_count
        idx = np.concatenate([np.arange(offset, offset + n), total + np.arange(offset, offset + n)])
        gamma[np.ix_(idx, idx)] = s.gamma
        d[idx] = s.d
        offset += n
    return GaussianState(gamma, d, copies.pop())


# ----------------------------------------------------------------------------
# operations


def identity(n_modes: int) -> SymplecticOp:
    return SymplecticOp(np.eye(2 * n_modes))


def beamsplitter(T, i: int, j: int, n_modes: int) -> SymplecticOp:
    """Lossless beam splitter with intensity transmissivity ``T`` between modes i and j.

    ``(q_i, q_j) -> (sqrt(T) q_i + sqrt(1-T) q_j, -sqrt(1-T) q_i + sqrt(T) q_j)``
    for both quadratures, i.e. ``a_i^dag -> t a_i^dag - r a_j^dag`` in the
    Schroedinger picture.
    """
    if not 0 <= T <= 1:
        raise ValueError(f"transmissivity must lie in [0, 1], got {T}")
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    t, r = np.sqrt(T), np.sqrt(1 - T)
    return SymplecticOp(
        _embed(
            {(i, i): ((t, 0), (0, t)), (i, j): ((r, 0), (0, r)), (j, i): ((-r, 0), (0, -r)), (j, j): ((t, 0), (0, t))},
            n_modes,
        )
    )


def phase_shift(phi, i: int, n_modes: int) -> SymplecticOp:
    """``a_i -> a_i exp(-i phi)``: ``x' = x cos + p sin``, ``p' = -x sin + p cos``."""
    c, s = np.cos(phi), np.sin(phi)
    return SymplecticOp(_embed({(i, i): ((c, s), (-s, c))}, n_modes))


def squeezer(r, theta, i: int, n_modes: int) -> SymplecticOp:
    """Single-mode squeezer; maps vacuum to ``squeezed(r, theta)``."""
    c, s = np.cos(theta), np.sin(theta)
    ch, sh = np.cosh(r), np.sinh(r)
    return SymplecticOp(_embed({(i, i): ((ch + sh * c, sh * s), (sh * s, ch - sh * c))}, n_modes))


def two_mode_squeezer(r, theta, i: int, j: int, n_modes: int) -> SymplecticOp:
    """Two-mode squeezer; on vacuum it produces the TMSV with pair phase ``theta``."""
    if i == j:
        raise ValueError("two-mode squeezer needs two distinct modes")
    c, s = np.cos(theta), np.sin(theta)
    ch, sh = np.cosh(r), np.sinh(r)
    diag = ((ch, 0), (0, ch))
    cross = ((sh * c, sh * s), (sh * s, -sh * c))
    return SymplecticOp(_embed({(i, i): diag, (j, j): diag, (i, j): cross, (j, i): cross}, n_modes))


def displacement(alpha, i: int, n_modes: int) -> SymplecticOp:
    _check_mode(i, n_modes)
    alpha = complex(alpha)
    shift = np.zeros(2 * n_modes)
    shift[i] = np.sqrt(2) * alpha.real
    shift[n_modes + i] = np.sqrt(2) * alpha.imag
    return SymplecticOp(np.eye(2 * n_modes), shift)


def apply(op: SymplecticOp, state: GaussianState) -> GaussianState:
    if op.mode_count != state.mode_count:
        raise ValueError(f"operation acts on {op.mode_count} modes, state has {state.mode_count}")
    s = op.matrix
    gamma = s @ state.gamma @ s.T
    return GaussianState(0.5 * (gamma + gamma.T), s @ state.d + op.shift, state.copies)


def loss_channel(state: GaussianState, i: int, T) -> GaussianState:
    """Pure loss: mix mode ``i`` with vacuum at transmissivity ``T`` and discard the ancilla."""
    if not 0 <= T <= 1:
        raise ValueError(f"transmission must lie in [0, 1], got {T}")
    _check_mode(i, state.mode_count)
    idx = state.quad_index([i])
    scale = np.ones(2 * state.mode_count)
    scale[idx] = np.sqrt(T)
    gamma = state.gamma * np.outer(scale, scale)
    gamma[idx, idx] += 1 - T
    return GaussianState(gamma, state.d * scale, state.copies)


def keep(state: GaussianState, modes) -> GaussianState:
    """Reduced state on ``modes``, in the given order."""
    modes = [int(m) for m in modes]
    if not modes:
        raise ValueError("cannot trace out every mode")
    if len(set(modes)) != len(modes):
        raise ValueError(f"duplicate modes in {modes}")
    for m in modes:
        _check_mode(m, state.mode_count)
    idx = state.quad_index(modes)
    return GaussianState(state.gamma[np.ix_(idx, idx)], state.d[idx], state.copies)


def trace_out(state: GaussianState, modes) -> GaussianState:
    drop = {int(m) for m in modes}
    for m in drop:
        _check_mode(m, state.mode_count)
    return keep(state, [m for m in range(state.mode_count) if m not in drop])
