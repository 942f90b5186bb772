import numpy as np
import pytest
from hypothesis import given, strategies as st

from gphot import gaussian as gs

seeds = st.integers(0, 2**31 - 1)


def random_state(seed, n=3):
    r = np.random.default_rng(seed)
    parts = [
        gs.displaced_squeezed_thermal(
            complex(r.normal(), r.normal()) * 0.7, r.uniform(0, 1), r.uniform(0, 2 * np.pi), r.uniform(0, 1)
        )
        for _ in range(n)
    ]
    st_ = gs.tensor(*parts)
    for i in range(n - 1):
        st_ = gs.apply(gs.beamsplitter(r.uniform(0, 1), i, i + 1, n), st_)
    return st_


def random_op(seed, n=3):
    r = np.random.default_rng(seed)
    op = gs.identity(n)
    for _ in range(4):
        i, j = r.choice(n, 2, replace=False)
        kind = r.integers(4)
        if kind == 0:
            op = gs.beamsplitter(r.uniform(), i, j, n) @ op
        elif kind == 1:
            op = gs.phase_shift(r.uniform(0, 6), i, n) @ op
        elif kind == 2:
            op = gs.squeezer(r.uniform(0, 1), r.uniform(0, 6), i, n) @ op
        else:
            op = gs.two_mode_squeezer(r.uniform(0, 1), r.uniform(0, 6), i, j, n) @ op
    return op


def test_vacuum():
    v = gs.vacuum(2)
    assert np.array_equal(v.gamma, np.eye(4)) and np.array_equal(v.d, np.zeros(4))


def test_constructor_means():
    assert np.isclose(gs.thermal(0.7).mean_photons()[0], 0.7)
    assert np.isclose(gs.coherent(1 + 1j).mean_photons()[0], 2.0)
    assert np.isclose(gs.squeezed(0.5).mean_photons()[0], np.sinh(0.5) ** 2)
    t = gs.tmsv(0.8)
    assert np.allclose(t.mean_photons(), np.sinh(0.8) ** 2)
    d = gs.displaced_squeezed_thermal(0.5j, 0.3, 1.0, 0.2)
    n_ref = 0.25 + (1 + 2 * 0.2) * np.cosh(0.6) / 2 - 0.5
    assert np.isclose(d.mean_photons()[0], n_ref)


def test_validation_errors():
    with pytest.raises(ValueError):
        gs.GaussianState(np.array([[1.0, 0.1], [0.0, 1.0]]), np.zeros(2))
    with pytest.raises(ValueError):
        gs.GaussianState(-np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        gs.thermal(-0.1)
    with pytest.raises(ValueError):
        gs.SymplecticOp(np.diag([2.0, 2.0]))
    with pytest.raises(ValueError):
        gs.tensor(gs.vacuum(1, copies=2), gs.vacuum(1))


def test_beamsplitter_convention():
    # |alpha, 0> -> |sqrt(T) alpha, -sqrt(1-T) alpha>
    st_ = gs.apply(gs.beamsplitter(0.3, 0, 1, 2), gs.tensor(gs.coherent(1.0), gs.vacuum()))
    assert np.allclose(st_.d[:2], np.sqrt(2) * np.array([np.sqrt(0.3), -np.sqrt(0.7)]))
    assert np.allclose(gs.beamsplitter(1.0, 0, 1, 2).matrix, np.eye(4))


def test_phase_convention():
    op = gs.phase_shift(0.4, 0, 1)
    c, s = np.cos(0.4), np.sin(0.4)
    assert np.allclose(op.matrix, [[c, s], [-s, c]])


def test_loss_on_coherent():
    st_ = gs.loss_channel(gs.coherent(2.0), 0, 0.25)
    assert np.allclose(st_.gamma, np.eye(2)) and np.isclose(st_.mean_photons()[0], 1.0)


def test_keep_and_trace_out():
    st_ = random_state(3)
    k = gs.keep(st_, [2, 0])
    assert k.mode_count == 2
    assert np.allclose(k.mean_photons(), st_.mean_photons()[[2, 0]])
    assert gs.trace_out(st_, [1]).allclose(gs.keep(st_, [0, 2]))


@given(seeds)
def test_constructors_are_physical(s):
    st_ = random_state(s)
    assert np.allclose(st_.gamma, st_.gamma.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(st_.gamma) > 0)


@given(seeds, seeds)
def test_apply_preserves_positivity(s1, s2):
    st_ = gs.apply(random_op(s2), random_state(s1))
    assert np.all(np.linalg.eigvalsh(st_.gamma) > 0)


@given(seeds)
def test_ops_are_symplectic(s):
    op = random_op(s)
    j = gs.symplectic_form(3)
    assert np.allclose(op.matrix.T @ j @ op.matrix, j, atol=1e-10)


@given(seeds, st.floats(0, 1), st.floats(0, 1))
def test_loss_composition(s, t1, t2):
    st_ = random_state(s)
    a = gs.loss_channel(gs.loss_channel(st_, 1, t1), 1, t2)
    b = gs.loss_channel(st_, 1, t1 * t2)
    assert a.allclose(b, atol=1e-12)


@given(seeds, st.floats(0, 1))
def test_beamsplitter_inverse_restores(s, t):
    st_ = random_state(s)
    op = gs.beamsplitter(t, 0, 2, 3)
    assert gs.apply(op.inverse(), gs.apply(op, st_)).allclose(st_, atol=1e-12)


@given(seeds, st.floats(0, 1), st.floats(0, 6))
def test_trace_out_commutes_with_local_ops(s, t, phi):
    st_ = random_state(s)
    op3 = gs.phase_shift(phi, 1, 3) @ gs.beamsplitter(t, 0, 1, 3)
    op2 = gs.phase_shift(phi, 1, 2) @ gs.beamsplitter(t, 0, 1, 2)
    a = gs.trace_out(gs.apply(op3, st_), [2])
    b = gs.apply(op2, gs.trace_out(st_, [2]))
    assert a.allclose(b, atol=1e-12)


@given(seeds, st.floats(0, 6))
def test_passive_ops_conserve_photons(s, phi):
    st_ = random_state(s)
    op = gs.phase_shift(phi, 0, 3) @ gs.beamsplitter(0.4, 1, 2, 3)
    assert np.isclose(gs.apply(op, st_).mean_photons().sum(), st_.mean_photons().sum())
