import numpy as np
import pytest

from gphot import fock


def test_tmsv_zero_is_vacuum():
    f = fock.tmsv(0.0, 5)
    assert f.element((0, 0), (0, 0)) == 1 and abs(f.trace() - 1) < 1e-15


def test_thermal_defect_and_error():
    assert fock.thermal(1.0, 40, tol=1e-10).defect < 1e-10
    with pytest.raises(fock.CutoffError):
        fock.thermal(1.0, 10)
    with pytest.raises(fock.CutoffError):
        fock.thermal(0.1, 41)


def test_coherent_zero_is_vacuum():
    f = fock.coherent(0.0, 4)
    assert np.allclose(f.diagonal(), [1, 0, 0, 0])


def test_loss_identity_and_single_photon():
    f = fock.create(fock.coherent(0.0, 4), 0)
    assert np.allclose(fock.loss(f, 1.0, 0).rho, f.rho)
    assert np.allclose(fock.loss(f, 0.3, 0).diagonal()[:2], [0.7, 0.3])


def test_hong_ou_mandel():
    f = fock.create(fock.create(fock.tensor(fock.coherent(0, 3), fock.coherent(0, 3)), 0), 1)
    out = fock.beamsplitter(f, 0.5, 0, 1).diagonal()
    assert np.allclose([out[2, 0], out[1, 1], out[0, 2]], [0.5, 0, 0.5], atol=1e-15)


def test_beamsplitter_preserves_trace():
    f = fock.tensor(fock.thermal(0.2, 20), fock.coherent(0.5, 20))
    g = fock.beamsplitter(f, 0.3, 0, 1)
    assert abs(g.trace() + g.defect - f.trace()) < 1e-12


def test_oracle_pnd_vacuum_and_tmsv():
    p, _ = fock.oracle_pnd(fock.coherent(0.0, 5), [((0,), 1.0, 0.0)], 4)
    assert np.array_equal(p, [1, 0, 0, 0, 0])
    r = 0.5
    p, _ = fock.oracle_pnd(fock.tmsv(r, 40), [((0,), 1.0, 0.0), ((1,), 1.0, 0.0)], (6, 6))
    n = np.arange(7)
    assert np.allclose(np.diag(p), np.tanh(r) ** (2 * n) / np.cosh(r) ** 2, atol=1e-15)
    assert abs(p.sum() - np.trace(p)) < 1e-15


def test_too_many_modes():
    f = fock.tensor(fock.thermal(0.1, 10), fock.thermal(0.1, 10))
    with pytest.raises(ValueError):
        fock.tensor(f, fock.tensor(fock.thermal(0.1, 10), fock.thermal(0.1, 10)))


def test_independent_sum():
    p = np.array([0.5, 0.5, 0, 0])
    assert np.allclose(fock.independent_sum(p, 3), [1 / 8, 3 / 8, 3 / 8, 1 / 8])
