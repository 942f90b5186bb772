"""Non-photon-number-resolving detectors gated into early/central/late time bins.

Every time bin of a detector is a set of state modes.  Because a click blocks
the detector for the rest of the repetition cycle, the outcomes of one
detector are

    E  = p_on (1 - V_E)
    C  = p_on (V_E - V_EC)
    L  = p_on (V_EC - V_ECL)
    no = p_off + p_on V_ECL        (exact)   or   V_ECL   (approximate)

where ``V_S`` projects on "no photon and no noise count in the bins S".
Products of such operators for different detectors expand into signed sums
of vacuum projectors on unions of mode sets; each of those is one evaluation
of the generating function at ``w = eta`` on the involved modes, times the
Poisson probability of no noise count in those bins.

Coincidence probabilities are tiny differences of vacuum probabilities close
to one.  They are therefore evaluated as ``sum c_k + sum c_k expm1(L_k)`` with
``L_k`` the logarithm of each vacuum probability, computed through
``log1p`` of the eigenvalues of the symmetrized ``W (gamma - I) / 2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .gaussian import GaussianState, keep

__all__ = [
    "BINS",
    "ClickDetector",
    "DetectionModel",
    "DetectorSpec",
    "EventExpr",
    "NoiseSolution",
    "linearized_noise",
    "log_vacuum_probability",
    "self_consistent_noise",
]

BINS = ("E", "C", "L")
OUTCOMES = BINS + ("no",)


class DivergentNoiseError(ArithmeticError):
    pass


@dataclass(frozen=True)
class DetectorSpec:
    """Physical detector parameters.  Rates in 1/s, times in s."""

    efficiency: float = 0.2
    dark_rate: float = 0.0
    afterpulse_prob: float = 0.0
    dead_time: float = 0.0
    rep_rate: float = 1e8
    bin_width: float = 1e-9

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if not 0 <= self.afterpulse_prob < 1:
            raise ValueError(f"afterpulse probability must lie in [0, 1), got {self.afterpulse_prob}")
        for name in ("dark_rate", "dead_time", "bin_width"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.rep_rate <= 0:
            raise ValueError("repetition rate must be > 0")


def log_vacuum_probability(state: GaussianState, modes, eta) -> float:
    """``log <:exp(-sum_s eta_s n_s):>`` over ``modes``, accurate also when close to 0."""
    sub = keep(state, list(modes))
    n = 2 * sub.mode_count
    root = np.sqrt(np.concatenate([eta, eta]).astype(float))
    delta = sub.gamma - np.eye(n)
    lam = np.linalg.eigvalsh(root[:, None] * delta * root[None, :] / 2)
    if np.any(lam <= -1):
        raise ArithmeticError("vacuum projection of a non-physical covariance matrix")
    out = -0.5 * math.fsum(np.log1p(lam))
    if np.any(sub.d != 0):
        w2 = root**2
        big = np.eye(n) + w2[:, None] * delta / 2
        out -= float(sub.d @ np.linalg.solve(big, w2 * sub.d)) / 2
    return sub.copies * out


@dataclass(frozen=True)
class NoiseSolution:
    r_noise: float
    nu_cycle: float
    nu_bin: float
    p_click: float
    click_rate: float
    p_on: float


def linearized_noise(spec: DetectorSpec, p0: float) -> float:
    """Noise rate with ``exp(-r / f)`` linearized; valid for ``r_noise << f_rep``."""
    den = 1 - spec.afterpulse_prob * p0
    if den <= 0:
        raise DivergentNoiseError("afterpulse feedback diverges")
    return (spec.dark_rate + spec.afterpulse_prob * spec.rep_rate * (1 - p0)) / den


def self_consistent_noise(spec: DetectorSpec, p0: float, exact: bool = True) -> NoiseSolution:
    """Noise rate including afterpulses triggered by the detector's own clicks.

    ``p0`` is the probability that no photon reaches the detector in a
    repetition cycle.  The exact fixed point of
    ``r = r_dark + p_ap f (1 - exp(-r / f) p0)`` is bracketed by
    ``[r_dark, r_dark + p_ap f]`` and the map is a contraction, so a root
    finder converges to machine precision.
    """
    if not 0 <= p0 <= 1 + 1e-12:
        raise ValueError(f"vacuum probability must lie in [0, 1], got {p0}")
    f, pap = spec.rep_rate, spec.afterpulse_prob
    if exact:
        lo, hi = spec.dark_rate, spec.dark_rate + pap * f
        if hi == lo:
            r = lo
        else:
            g = lambda r: r - spec.dark_rate - pap * f * (1 - math.exp(-r / f) * p0)
            r = optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    else:
        r = linearized_noise(spec, p0)
    nu = r / f
    p_click = -math.expm1(-nu) + math.exp(-nu) * (1 - p0)
    rate = p_click * f
    return NoiseSolution(r, nu, r * spec.bin_width, p_click, rate, 1 / (1 + rate * spec.dead_time))


@dataclass
class ClickDetector:
    """A physical detector: mode sets per time bin plus its parameters."""

    name: str
    bins: dict
    spec: DetectorSpec
    noise: NoiseSolution | None = None

    def __post_init__(self):
        unknown = set(self.bins) - set(BINS)
        if unknown:
            raise ValueError(f"unknown time bins {sorted(unknown)} for detector {self.name}")
        self.bins = {b: tuple(int(m) for m in self.bins.get(b, ())) for b in BINS}

    @property
    def modes(self) -> tuple:
        return tuple(m for b in BINS for m in self.bins[b])


class EventExpr:
    """Signed sum of products of vacuum projectors over (detector, bin) atoms."""

    __slots__ = ("terms", "detectors")

    def __init__(self, terms=None, detectors=frozenset()):
        self.terms = {} if terms is None else dict(terms)
        self.detectors = frozenset(detectors)

    @classmethod
    def one(cls) -> "EventExpr":
        return cls({frozenset(): 1.0})

    @classmethod
    def vacuum(cls, detector: str, bins) -> "EventExpr":
        return cls({frozenset((detector, b) for b in bins): 1.0}, {detector})

    def _combine(self, other, sign):
        if isinstance(other, (int, float)):
            other = EventExpr.one() * float(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0.0) + sign * c
        return EventExpr({k: c for k, c in out.items() if c != 0}, self.detectors | other.detectors)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-1.0 * self)._combine(other, 1.0)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return EventExpr({k: c * other for k, c in self.terms.items() if c * other != 0}, self.detectors)
        if self.detectors & other.detectors:
            raise ValueError(f"outcomes of detectors {sorted(self.detectors & other.detectors)} combined twice")
        out = {}
        for (ka, ca), (kb, cb) in itertools.product(self.terms.items(), other.terms.items()):
            k = ka | kb
            out[k] = out.get(k, 0.0) + ca * cb
        return EventExpr({k: c for k, c in out.items() if c != 0}, self.detectors | other.detectors)

    __rmul__ = __mul__

    def __len__(self):
        return len(self.terms)


def outcome(det: ClickDetector, which: str, exact: bool = True) -> EventExpr:
    """POVM element ``which`` in {E, C, L, no} of detector ``det``."""
    if det.noise is None:
        raise ValueError(f"detector {det.name} has no noise solution attached")
    p_on = det.noise.p_on
    v = lambda bins: EventExpr.vacuum(det.name, bins)
    one = EventExpr({frozenset(): 1.0}, {det.name})
    if which == "E":
        return p_on * (one - v("E"))
    if which == "C":
        return p_on * (v("E") - v("EC"))
    if which == "L":
        return p_on * (v("EC") - v("ECL"))
    if which == "no":
        if exact:
            return (1 - p_on) * one + p_on * v("ECL")
        return v("ECL")
    if which == "click":
        return one - outcome(det, "no", exact)
    raise ValueError(f"unknown outcome {which!r}")


def single_bin_click(det: ClickDetector, b: str) -> EventExpr:
    """``p_on (1 - V_b)``, the click operator of one bin ignoring the other bins."""
    one = EventExpr({frozenset(): 1.0}, {det.name})
    return det.noise.p_on * (one - EventExpr.vacuum(det.name, b))


@dataclass
class DetectionModel:
    """A Gaussian state seen by a set of click detectors.

    Noise rates are solved self-consistently per detector at construction.
    Vacuum-projector expectations are cached by mode set.
    """

    state: GaussianState
    detectors: list
    exact: bool = True
    exact_noise: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        names = [d.name for d in self.detectors]
        if len(set(names)) != len(names):
            raise ValueError("detector names must be unique")
        used = [m for d in self.detectors for m in d.modes]
        if len(set(used)) != len(used):
            raise ValueError("a mode is routed to two detector bins")
        bad = [m for m in used if not 0 <= m < self.state.mode_count]
        if bad:
            raise IndexError(f"modes {bad} not in the state")
        self.by_name = {d.name: d for d in self.detectors}
        for d in self.detectors:
            d.noise = self_consistent_noise(d.spec, self.vacuum_probability({(d.name, b) for b in BINS}, noise=False), self.exact_noise)

    def _modes_eta(self, atoms):
        modes, eta = [], []
        for name, b in atoms:
            det = self.by_name[name]
            modes.extend(det.bins[b])
            eta.extend([det.spec.efficiency] * len(det.bins[b]))
        return modes, eta

    def log_vacuum(self, atoms, noise: bool = True) -> float:
        """``log <prod V_atom>``; with ``noise`` the noise counts are included."""
        atoms = frozenset(atoms)
        modes, eta = self._modes_eta(atoms)
        key = tuple(sorted(zip(modes, eta)))
        if key not in self._cache:
            if not key:
                self._cache[key] = 0.0
            else:
                self._cache[key] = log_vacuum_probability(self.state, [m for m, _ in key], np.array([e for _, e in key]))
        out = self._cache[key]
        if noise:
            out -= sum(self.by_name[n].noise.nu_bin for n, _ in atoms)
        return out

    def vacuum_probability(self, atoms, noise: bool = True) -> float:
        """``<prod V_atom>``: no photon detected (and, with ``noise``, no noise count) in all atoms."""
        return math.exp(self.log_vacuum(atoms, noise))

    def probability(self, expr: EventExpr) -> float:
        const = math.fsum(expr.terms.values())
        return float(const + math.fsum(c * math.expm1(self.log_vacuum(k)) for k, c in expr.terms.items()))

    def outcome(self, name: str, which: str) -> EventExpr:
        return outcome(self.by_name[name], which, self.exact)

    def bin_click_probability(self, name: str, b: str) -> float:
        return self.probability(self.outcome(name, b))

    def coincidence(self, clicks: dict, exclusive_over=()) -> EventExpr:
        """Event ``clicks = {detector: bin}`` with ``exclusive_over`` detectors silent."""
        expr = EventExpr.one()
        for name, b in clicks.items():
            expr = expr * self.outcome(name, b)
        for name in exclusive_over:
            expr = expr * self.outcome(name, "no")
        return expr

    def coincidence_probability(self, clicks: dict, exclusive_over=()) -> float:
        return self.probability(self.coincidence(clicks, exclusive_over))

    def approximation_bound(self, clicks: dict, silent) -> float:
        """Upper bound on ``exact - approximate`` for an exclusive coincidence.

        With ``X`` the click product and ``V_i`` the full-cycle vacuum
        projectors of the silent detectors, the difference equals
        ``<X [p1 (1-V1) V2 + p2 V1 (1-V2) + p1 p2 (1-V1)(1-V2)]>`` (two
        silent detectors), which is bounded by replacing the remaining ``V``
        by one.
        """
        x = EventExpr.one()
        for name, b in clicks.items():
            x = x * self.outcome(name, b)
        bound = 0.0
        silent = list(silent)
        for r in range(1, len(silent) + 1):
            for sub in itertools.combinations(silent, r):
                expr = x
                p_off = 1.0
                for name in sub:
                    det = self.by_name[name]
                    one = EventExpr({frozenset(): 1.0}, {name})
                    expr = expr * (one - EventExpr.vacuum(name, BINS))
                    p_off *= 1 - det.noise.p_on
                bound += p_off * self.probability(expr)
        return bound
