"""Time-bin entanglement BBM92 link: network model, key rate, QBER, retrodiction.

Unfolded model of one Schmidt block (16 modes):

* a double-pulse pumped source emits two TMSV pairs, ``(a_S, b_S)`` from the
  first pulse and ``(a_L, b_L)`` from the second, with squeezing
  ``chi_S = r0 sqrt(T_P1 (1 - L_PS) T_P2)`` and
  ``chi_L = r0 exp(i phi) sqrt((1 - T_P1)(1 - L_PL)(1 - T_P2))``;
* per user, both photons pass the link loss, then an imbalanced
  interferometer whose first coupler splits each into a short and a long
  arm; the short arm of the first pulse arrives in the early bin, the long
  arm of the second pulse in the late bin, and the long arm of the first
  pulse meets the short arm of the second pulse in the central bin;
* mode mismatch at the second coupler: the central-bin long-arm mode is split
  with transmissivity ``V`` into a part that interferes and an orthogonal
  part that does not, both reaching the same detectors;
* detector ``X0`` sees the transmitted port of the second coupler, ``X1``
  the reflected one.

``copies = K`` replicates the block for ``K`` equally strong Schmidt modes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from . import gaussian as gs
from .detection import BINS, ClickDetector, DetectionModel, DetectorSpec, single_bin_click
from .photon_statistics import DetectorPartition, pnd_table

__all__ = [
    "NoCoincidenceError",
    "PumpConfig",
    "RetrodictionResult",
    "ScenarioConfig",
    "SpectralConfig",
    "UserConfig",
    "build_network",
    "distance_sweep",
    "evaluate",
    "mu_sweep",
    "retrodict",
    "sifted_key_rate",
    "spectral_correction",
    "time_qber",
]

log = logging.getLogger(__name__)

N_MODES = 16
SOURCE = {"aS": 0, "bS": 1, "aL": 2, "bL": 3}


class NoCoincidenceError(ArithmeticError):
    pass


def _unit(name, x):
    if not 0 <= x <= 1:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


@dataclass(frozen=True)
class PumpConfig:
    mu: float
    T_P1: float = 0.5
    T_P2: float = 0.5
    L_PS: float = 0.0
    L_PL: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mean pair number mu must be > 0, got {self.mu}")
        for name in ("T_P1", "T_P2", "L_PS", "L_PL"):
            _unit(name, getattr(self, name))


@dataclass(frozen=True)
class UserConfig:
    fiber_km: float = 0.0
    fiber_db_per_km: float = 0.2
    insertion_loss_db: float = 0.0
    bs1_T: float = 0.5
    bs2_T: float = 0.5
    loss_short: float = 0.0
    loss_long: float = 0.0
    visibility: float = 1.0
    phase: float = 0.0
    detectors: tuple = (DetectorSpec(), DetectorSpec())

    def __post_init__(self):
        for name in ("fiber_km", "fiber_db_per_km", "insertion_loss_db"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("bs1_T", "bs2_T", "loss_short", "loss_long", "visibility"):
            _unit(name, getattr(self, name))
        if len(self.detectors) != 2:
            raise ValueError("each user needs exactly two detectors")

    @property
    def link_transmission(self) -> float:
        return 10 ** (-(self.fiber_km * self.fiber_db_per_km + self.insertion_loss_db) / 10)


@dataclass(frozen=True)
class SpectralConfig:
    tau_A: float = 1.0
    tau_B: float = 1.0
    tau_pair: float = 1.0

    def __post_init__(self):
        if min(self.tau_A, self.tau_B, self.tau_pair) <= 0:
            raise ValueError("spectral transmissions must be > 0")


@dataclass(frozen=True)
class ScenarioConfig:
    pump: PumpConfig
    alice: UserConfig = UserConfig()
    bob: UserConfig = UserConfig()
    schmidt_K: int = 1
    rep_rate: float = 1e8
    spectral: SpectralConfig = SpectralConfig()
    phase_pairing: str = "same"
    exact_povm: bool = True

    def __post_init__(self):
        if int(self.schmidt_K) != self.schmidt_K or self.schmidt_K < 1:
            raise ValueError(f"schmidt_K must be a positive integer, got {self.schmidt_K}")
        if self.rep_rate <= 0:
            raise ValueError("rep_rate must be > 0")
        if self.phase_pairing not in ("same", "opposite"):
            raise ValueError("phase_pairing must be 'same' or 'opposite'")

    def with_mu(self, mu) -> "ScenarioConfig":
        return replace(self, pump=replace(self.pump, mu=mu))


# ----------------------------------------------------------------------------
# network


def squeezing(cfg: ScenarioConfig):
    """``(|chi_S|, |chi_L|)`` with ``r0`` fixed by the total mean pair number."""
    p = cfg.pump
    a_s = math.sqrt(p.T_P1 * (1 - p.L_PS) * p.T_P2)
    a_l = math.sqrt((1 - p.T_P1) * (1 - p.L_PL) * (1 - p.T_P2))
    if a_s == 0 and a_l == 0:
        raise ValueError("pump interferometer blocks both pulses")
    target = p.mu / cfg.schmidt_K
    f = lambda r0: np.sinh(r0 * a_s) ** 2 + np.sinh(r0 * a_l) ** 2 - target
    hi = 1.0
    while f(hi) < 0:
        hi *= 2
    r0 = optimize.brentq(f, 0.0, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    return r0 * a_s, r0 * a_l


def _source(cfg: ScenarioConfig) -> gs.GaussianState:
    chi_s, chi_l = squeezing(cfg)
    st = gs.vacuum(N_MODES, cfg.schmidt_K)
    st = gs.apply(gs.two_mode_squeezer(chi_s, 0.0, SOURCE["aS"], SOURCE["bS"], N_MODES), st)
    st = gs.apply(gs.two_mode_squeezer(chi_l, cfg.pump.phase, SOURCE["aL"], SOURCE["bL"], N_MODES), st)
    return st


@dataclass
class Network:
    """Optical steps after the source and the detector routing."""

    steps: list
    routing: dict  # detector name -> {bin: modes}
    specs: dict  # detector name -> DetectorSpec

    def propagate(self, st: gs.GaussianState) -> gs.GaussianState:
        for kind, *args in self.steps:
            if kind == "op":
                st = gs.apply(args[0], st)
            else:
                st = gs.loss_channel(st, *args)
        return st


def _user_steps(u: UserConfig, p_s: int, p_l: int, anc: list):
    x = anc
    n = N_MODES
    steps = [("loss", p_s, u.link_transmission), ("loss", p_l, u.link_transmission)]
    steps += [("op", gs.beamsplitter(u.bs1_T, p_s, x[0], n)), ("op", gs.beamsplitter(u.bs1_T, p_l, x[1], n))]
    steps += [("loss", p_s, 1 - u.loss_short), ("loss", p_l, 1 - u.loss_short)]
    steps += [("loss", x[0], 1 - u.loss_long), ("loss", x[1], 1 - u.loss_long)]
    steps += [("op", gs.phase_shift(u.phase, x[0], n)), ("op", gs.phase_shift(u.phase, x[1], n))]
    steps += [("op", gs.beamsplitter(u.visibility, x[0], x[2], n))]
    steps += [
        ("op", gs.beamsplitter(u.bs2_T, p_s, x[3], n)),
        ("op", gs.beamsplitter(u.bs2_T, p_l, x[0], n)),
        ("op", gs.beamsplitter(u.bs2_T, x[4], x[2], n)),
        ("op", gs.beamsplitter(u.bs2_T, x[5], x[1], n)),
    ]
    routing = (
        {"E": (p_s,), "C": (p_l, x[4]), "L": (x[5],)},
        {"E": (x[3],), "C": (x[0], x[2]), "L": (x[1],)},
    )
    return steps, routing


def build_network(cfg: ScenarioConfig):
    """Return ``(state, network)``: the detected Gaussian state and its routing."""
    steps, routing, specs = [], {}, {}
    for label, user, p_s, p_l, anc in (
        ("A", cfg.alice, SOURCE["aS"], SOURCE["aL"], list(range(4, 10))),
        ("B", cfg.bob, SOURCE["bS"], SOURCE["bL"], list(range(10, 16))),
    ):
        s, r = _user_steps(user, p_s, p_l, anc)
        steps += s
        for i in range(2):
            routing[f"{label}{i}"] = r[i]
            specs[f"{label}{i}"] = replace(user.detectors[i], rep_rate=cfg.rep_rate)
    net = Network(steps, routing, specs)
    return net.propagate(_source(cfg)), net


def detection_model(cfg: ScenarioConfig, state=None, net=None) -> DetectionModel:
    if state is None:
        state, net = build_network(cfg)
    dets = [ClickDetector(name, dict(net.routing[name]), net.specs[name]) for name in sorted(net.routing)]
    return DetectionModel(state, dets, exact=cfg.exact_povm)


def transmissions(net: Network, source_mode: int) -> dict:
    """Single-photon transmission from a source mode to every (detector, bin), efficiency included."""
    probe = gs.apply(gs.displacement(1.0, source_mode, N_MODES), gs.vacuum(N_MODES))
    out = net.propagate(probe)
    power = (out.d[:N_MODES] ** 2 + out.d[N_MODES:] ** 2) / 2
    return {
        (name, b): net.specs[name].efficiency * float(sum(power[m] for m in modes))
        for name, bins in net.routing.items()
        for b, modes in bins.items()
    }


# ----------------------------------------------------------------------------
# key rate and QBER


def spectral_correction(cfg: ScenarioConfig) -> float:
    s = cfg.spectral
    return s.tau_pair / (s.tau_A * s.tau_B)


def coincidence_table(model: DetectionModel) -> dict:
    """Exclusive coincidences ``{(a, bin_a, b, bin_b): p}`` for one Alice and one Bob detector."""
    out = {}
    for a in ("A0", "A1"):
        a_other = "A1" if a == "A0" else "A0"
        for b in ("B0", "B1"):
            b_other = "B1" if b == "B0" else "B0"
            silent = model.outcome(a_other, "no") * model.outcome(b_other, "no")
            for ta in BINS:
                for tb in BINS:
                    expr = model.outcome(a, ta) * model.outcome(b, tb) * silent
                    out[(a, ta, b, tb)] = model.probability(expr)
    return out


def _classify(table: dict, pairing: str):
    c_time = e_time = c_phase = e_phase = 0.0
    for (a, ta, b, tb), p in table.items():
        if ta != "C" and tb != "C":
            if ta == tb:
                c_time += p
            else:
                e_time += p
        elif ta == "C" and tb == "C":
            same = a[1] == b[1]
            if same == (pairing == "same"):
                c_phase += p
            else:
                e_phase += p
    return c_time, e_time, c_phase, e_phase


def evaluate(cfg: ScenarioConfig) -> dict:
    """Key rate, QBERs and the coincidence sums for one configuration."""
    model = detection_model(cfg)
    c_time, e_time, c_phase, e_phase = _classify(coincidence_table(model), cfg.phase_pairing)
    if c_time + e_time <= 0:
        raise NoCoincidenceError("no time-basis coincidences; check losses")
    row = {
        "mu": cfg.pump.mu,
        "key_rate": cfg.rep_rate * spectral_correction(cfg) * (c_time + c_phase),
        "qber_time": e_time / (e_time + c_time),
        "qber_phase": e_phase / (e_phase + c_phase) if e_phase + c_phase > 0 else float("nan"),
        "p_time_correct": c_time,
        "p_time_error": e_time,
        "p_phase_correct": c_phase,
        "p_phase_error": e_phase,
    }
    for d in model.detectors:
        row[f"nu_bin_{d.name}"] = d.noise.nu_bin
        row[f"p_on_{d.name}"] = d.noise.p_on
    return row


def sifted_key_rate(cfg: ScenarioConfig) -> float:
    return evaluate(cfg)["key_rate"]


def time_qber(cfg: ScenarioConfig) -> float:
    return evaluate(cfg)["qber_time"]


# ----------------------------------------------------------------------------
# retrodiction


@dataclass(frozen=True)
class RetrodictionResult:
    mu: float
    probabilities: dict  # (f, s) -> p(f, s | coincidence)
    complement: float
    p_coincidence: float

    def total(self) -> float:
        return math.fsum(self.probabilities.values()) + self.complement


def pair_number_pnd(cfg: ScenarioConfig, n_max=1):
    """Pair-number distributions of the first and second pulse, ``(p_f, p_s)``."""
    src = _source(cfg)
    p_f = pnd_table(src, DetectorPartition.single([SOURCE["aS"]]), n_max)
    p_s = pnd_table(src, DetectorPartition.single([SOURCE["aL"]]), n_max)
    return p_f, p_s


def retrodict_one(cfg: ScenarioConfig, a="A0", a_bin="E", b="B0", b_bin="L") -> RetrodictionResult:
    """Which pair numbers ``(f, s)`` caused a raw coincidence ``a`` in ``a_bin`` and ``b`` in ``b_bin``.

    The click of ``a`` is attributed to the first pulse and the click of ``b``
    to the second; one pair gets through with the single-photon transmission
    ``T`` traced through the network, zero pairs only via a noise count.
    Time-bin correlations due to dead time are neglected, also in the raw
    coincidence probability used as the evidence.
    """
    state, net = build_network(cfg)
    model = detection_model(cfg, state, net)
    det_a, det_b = model.by_name[a], model.by_name[b]
    p_raw = model.probability(single_bin_click(det_a, a_bin) * single_bin_click(det_b, b_bin))
    if not p_raw > 1e-300:
        raise NoCoincidenceError(f"raw coincidence probability {p_raw:.3g} vanishes")
    t_a = transmissions(net, SOURCE["aS"])[(a, a_bin)]
    t_b = transmissions(net, SOURCE["bL"])[(b, b_bin)]
    p_f, p_s = pair_number_pnd(cfg)

    def click(det, b, t):
        return det.noise.p_on * (1 - math.exp(-det.noise.nu_bin) * (1 - t))

    probs = {}
    for f in (0, 1):
        for s in (0, 1):
            like = click(det_a, a_bin, t_a if f else 0.0) * click(det_b, b_bin, t_b if s else 0.0)
            probs[(f, s)] = like * p_f[f] * p_s[s] / p_raw
    comp = 1 - math.fsum(probs.values())
    if comp < -1e-9:
        log.warning("retrodiction complement %.3g is negative at mu=%g", comp, cfg.pump.mu)
    return RetrodictionResult(cfg.pump.mu, probs, comp, p_raw)


def retrodict(cfg: ScenarioConfig, mus) -> list:
    return [retrodict_one(cfg.with_mu(mu)) for mu in mus]


# ----------------------------------------------------------------------------
# sweeps


def mu_sweep(cfg: ScenarioConfig, mus, pool=None) -> list:
    cfgs = [cfg.with_mu(m) for m in mus]
    return list(pool.map(evaluate, cfgs)) if pool else [evaluate(c) for c in cfgs]


def with_distance(cfg: ScenarioConfig, km: float, split: str = "even") -> ScenarioConfig:
    """Set the total fiber length between the users, shared according to ``split``."""
    if split == "even":
        ka = kb = km / 2
    elif split == "alice":
        ka, kb = km, cfg.bob.fiber_km
    elif split == "bob":
        ka, kb = cfg.alice.fiber_km, km
    else:
        raise ValueError(f"unknown split {split!r}")
    return replace(cfg, alice=replace(cfg.alice, fiber_km=ka), bob=replace(cfg.bob, fiber_km=kb))


def distance_sweep(cfg: ScenarioConfig, kms, split="even", pool=None) -> list:
    cfgs = [with_distance(cfg, km, split) for km in kms]
    rows = list(pool.map(evaluate, cfgs)) if pool else [evaluate(c) for c in cfgs]
    for km, row in zip(kms, rows):
        row["distance_km"] = km
    return rows
