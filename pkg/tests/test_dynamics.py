import numpy as np
import pytest
from conftest import f1_transit_oracle

from relnewt.dynamics import (DomainExit, PhaseState, TimeReached, fly, hamiltonian, integrate, momentum,
                              shell_state, velocity)
from relnewt.fixtures import CTX, UNIT_DISK, V0, V1, V2

SQ3 = np.sqrt(3.0)


def test_hamiltonian_examples():
    assert hamiltonian(CTX, V0, PhaseState(0.0, (0.0, 0.0), (SQ3, 0.0))) == pytest.approx(2.0, abs=1e-15)
    assert hamiltonian(CTX, V0, PhaseState(0.0, (0.0, 0.0), (0.0, 0.0))) == 1.0
    assert hamiltonian(CTX, V1, PhaseState(0.0, (0.0, 0.0), (SQ3, 0.0))) == pytest.approx(2.1, abs=1e-15)


def test_velocity_momentum_inverse(rng):
    p = rng.normal(size=(10, 2)) * 3
    assert np.allclose(momentum(velocity(p, 2.0), 2.0), p, rtol=1e-12)
    assert np.all(np.linalg.norm(velocity(p, 2.0), axis=1) < 2.0)


def test_free_chord_exact():
    tr = integrate(CTX, V0, PhaseState(0.0, (-1.0, 0.0), (SQ3, 0.0)), DomainExit(UNIT_DISK))
    assert np.allclose(tr.x[-1], (1.0, 0.0), atol=1e-12)
    assert tr.t[-1] == pytest.approx(4 / SQ3, abs=1e-12)


def test_f1_head_on_transit():
    tr = integrate(CTX, V1, PhaseState(0.0, (-1.0, 0.0), (SQ3, 0.0)), DomainExit(UNIT_DISK))
    assert np.allclose(tr.x[-1], (1.0, 0.0), atol=1e-10)
    assert np.linalg.norm(tr.velocity[-1]) == pytest.approx(SQ3 / 2, abs=1e-10)
    assert tr.t[-1] == pytest.approx(f1_transit_oracle(), abs=1e-9)


def test_zero_time_single_sample():
    tr = integrate(CTX, V2, shell_state(CTX, V2, (0.2, 0.1), (1.0, 1.0)), TimeReached(0.0))
    assert tr.n_samples == 1


def test_time_reversal(rng):
    st = shell_state(CTX, V2, (-0.9, 0.2), (1.0, 0.1))
    fwd = integrate(CTX, V2, st, DomainExit(UNIT_DISK))
    end = fwd.final
    back = integrate(CTX, V2, PhaseState(0.0, end.x, -end.p), TimeReached(fwd.duration))
    assert np.allclose(back.x[-1], st.x, atol=1e-9)
    assert fwd.max_drift < 1e-10


def test_fly_matches_integrate(rng):
    th = rng.uniform(0, 2 * np.pi, 6)
    X = UNIT_DISK.point(th)
    U = -X + 0.3 * rng.normal(size=X.shape)
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    res = fly(CTX, V2, UNIT_DISK, X, U)
    for i in range(6):
        tr = integrate(CTX, V2, shell_state(CTX, V2, X[i], U[i]), DomainExit(UNIT_DISK))
        assert np.allclose(res.exit_point[i], tr.x[-1], atol=1e-8)
