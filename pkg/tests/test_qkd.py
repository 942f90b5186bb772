import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from gphot import qkd
from gphot.detection import BINS, DetectorSpec
from gphot.qkd import PumpConfig, ScenarioConfig, SpectralConfig, UserConfig

quiet = DetectorSpec(efficiency=0.2)
noisy = DetectorSpec(efficiency=0.2, dark_rate=3e3, afterpulse_prob=0.03, dead_time=1e-5)


def scenario(mu=0.01, spec=quiet, il=3.0, V=1.0, K=1, **kw):
    user = UserConfig(insertion_loss_db=il, visibility=V, detectors=(spec, spec))
    return ScenarioConfig(PumpConfig(mu), user, user, schmidt_K=K, **kw)


def test_r0_reproduces_mu():
    cfg = scenario(0.2, K=4)
    chi_s, chi_l = qkd.squeezing(cfg)
    assert abs(4 * (math.sinh(chi_s) ** 2 + math.sinh(chi_l) ** 2) - 0.2) < 1e-14


def test_all_joint_outcomes_sum_to_one():
    cfg = scenario(0.1, noisy, V=0.9)
    model = qkd.detection_model(cfg)
    names = ("A0", "A1", "B0", "B1")
    total = 0.0
    for pattern in itertools.product(BINS + ("no",), repeat=4):
        expr = model.outcome(names[0], pattern[0])
        for n, w in zip(names[1:], pattern[1:]):
            expr = expr * model.outcome(n, w)
        total += model.probability(expr)
    assert abs(total - 1) < 1e-12


def test_noiseless_errors_come_from_multi_pairs():
    # without noise every error needs two pairs, so both QBERs scale like mu
    rows = [qkd.evaluate(scenario(mu)) for mu in (1e-4, 1e-3)]
    for k in ("qber_time", "qber_phase"):
        assert 0 < rows[0][k] < 1e-3
        assert abs(rows[1][k] / rows[0][k] - 10) < 0.1
    assert rows[0]["p_time_correct"] > 0 and rows[0]["p_phase_correct"] > 0


def test_opposite_pairing_swaps_phase_errors():
    a = qkd.evaluate(scenario(0.01))
    b = qkd.evaluate(scenario(0.01, phase_pairing="opposite"))
    assert abs(a["p_phase_correct"] - b["p_phase_error"]) < 1e-15
    assert abs(a["qber_phase"] + b["qber_phase"] - 1) < 1e-12


def test_alice_bob_swap_symmetry():
    alice = UserConfig(fiber_km=10, insertion_loss_db=2, visibility=0.9, detectors=(noisy, replace(noisy, dark_rate=500)))
    bob = UserConfig(fiber_km=30, insertion_loss_db=4, visibility=0.97, detectors=(replace(noisy, efficiency=0.25), noisy))
    a = qkd.evaluate(ScenarioConfig(PumpConfig(0.05), alice, bob))
    b = qkd.evaluate(ScenarioConfig(PumpConfig(0.05), bob, alice))
    for k in ("key_rate", "qber_time", "qber_phase"):
        assert abs(a[k] - b[k]) <= 1e-10 * abs(a[k])


def test_time_qber_half_in_dark_count_limit():
    assert abs(qkd.time_qber(scenario(1e-9, noisy, il=10)) - 0.5) < 1e-3


def test_visibility_raises_phase_qber():
    q = [qkd.evaluate(scenario(0.01, V=v))["qber_phase"] for v in (1.0, 0.95, 0.8)]
    assert q[0] < q[1] < q[2]


def test_doubling_loss_halves_coincidences():
    cfg = scenario(1e-4)
    base = qkd.evaluate(cfg)["p_time_correct"]
    worse = replace(cfg, bob=replace(cfg.bob, insertion_loss_db=cfg.bob.insertion_loss_db + 10 * math.log10(2)))
    assert abs(qkd.evaluate(worse)["p_time_correct"] / base - 0.5) < 1e-3


def test_spectral_correction_scales_key_rate():
    cfg = scenario(0.01)
    spec = replace(cfg, spectral=SpectralConfig(tau_A=0.5, tau_B=0.8, tau_pair=0.6))
    assert abs(qkd.spectral_correction(spec) - 1.5) < 1e-15
    assert abs(qkd.sifted_key_rate(spec) / qkd.sifted_key_rate(cfg) - 1.5) < 1e-12


def test_transmissions():
    cfg = scenario(0.01, il=0.0)
    _, net = qkd.build_network(cfg)
    t = qkd.transmissions(net, qkd.SOURCE["aS"])
    assert abs(sum(v for (n, _), v in t.items() if n.startswith("A")) - 0.2) < 1e-14
    assert abs(t[("A0", "E")] - 0.25 * 0.2) < 1e-14 and t[("A0", "L")] == 0


def test_retrodiction_without_noise_has_no_zero_pair_terms():
    res = qkd.retrodict_one(scenario(0.05))
    assert res.probabilities[(0, 0)] == 0 and res.probabilities[(0, 1)] == 0 and res.probabilities[(1, 0)] == 0
    assert 0.9 < res.probabilities[(1, 1)] <= 1
    assert abs(res.total() - 1) < 1e-15


def test_retrodiction_small_mu_dominated_by_noise():
    res = qkd.retrodict_one(scenario(1e-5, noisy, il=15))
    assert max(res.probabilities, key=res.probabilities.get) == (0, 0)
    assert res.complement >= 0


def test_pair_number_statistics_thermal_to_poisson():
    n = np.arange(4)
    m = 0.25  # mean pairs per pulse
    p_f, p_s = qkd.pair_number_pnd(scenario(0.5, K=1), 3)
    assert np.allclose(p_f, m**n / (1 + m) ** (n + 1), atol=1e-14)
    assert np.allclose(p_f, p_s, atol=1e-15)
    p_f, _ = qkd.pair_number_pnd(scenario(0.5, K=100), 3)
    pois = np.exp(-m) * m**n / np.array([1, 1, 2, 6])
    assert np.max(np.abs(p_f - pois)) < 2e-3


def test_distance_sweep_and_split():
    cfg = scenario(0.02, noisy)
    assert qkd.with_distance(cfg, 40).alice.fiber_km == 20
    assert qkd.with_distance(cfg, 40, "bob").bob.fiber_km == 40
    with pytest.raises(ValueError):
        qkd.with_distance(cfg, 40, "carol")
    rows = qkd.distance_sweep(cfg, [0, 50, 100])
    assert [r["distance_km"] for r in rows] == [0, 50, 100]
    assert rows[0]["key_rate"] > rows[1]["key_rate"] > rows[2]["key_rate"]


def test_no_coincidence_error():
    dead = DetectorSpec(efficiency=0.0)
    with pytest.raises(qkd.NoCoincidenceError):
        qkd.evaluate(scenario(0.01, dead))
    with pytest.raises(qkd.NoCoincidenceError):
        qkd.retrodict_one(scenario(0.01, dead))


def test_validation():
    with pytest.raises(ValueError):
        PumpConfig(0.0)
    with pytest.raises(ValueError):
        PumpConfig(0.1, T_P1=1.5)
    with pytest.raises(ValueError):
        UserConfig(visibility=1.2)
    with pytest.raises(ValueError):
        UserConfig(detectors=(quiet,))
    with pytest.raises(ValueError):
        scenario(K=0)
    with pytest.raises(ValueError):
        scenario(phase_pairing="sideways")
    with pytest.raises(ValueError):
        SpectralConfig(tau_A=0)
    with pytest.raises(ValueError):
        qkd.squeezing(ScenarioConfig(PumpConfig(0.1, T_P1=1.0, T_P2=0.0)))
