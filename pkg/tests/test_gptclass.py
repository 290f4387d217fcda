import numpy as np
import pytest

from acflip.gptclass import (
    PAULI_SETTINGS,
    CorrelationTable,
    Level,
    NonQuantumDataError,
    classify,
    correlation_table,
    reconstruct_state,
    signaling_success_probability,
    tomographically_complete,
)
from acflip.qcore import (
    BELL_STATES,
    KET_0,
    KET_X,
    KET_XBAR,
    PAULI_MEASUREMENTS,
    PHI_PLUS,
    PSI_MINUS,
    DensityMatrix,
    Party,
    ProjectiveMeasurement,
    partial_trace,
    random_density_matrix,
)

ETA_Z = DensityMatrix(np.diag([0.5, 0, 0, 0.5]))


def proj(ket):
    return np.outer(ket.amplitudes, ket.amplitudes.conj())


ETA_X = DensityMatrix(0.5 * (proj(KET_X @ KET_X) + proj(KET_XBAR @ KET_XBAR)))


class TestCorrelationTable:
    def test_phi_plus_zz_perfectly_correlated(self):
        z = PAULI_MEASUREMENTS["z"]
        t = correlation_table(PHI_PLUS.dm(), [z], [z])
        assert t.probs[0, 0, 0, 0] + t.probs[0, 0, 1, 1] == pytest.approx(1, abs=1e-12)

    def test_maximally_mixed_uniform(self):
        t = correlation_table(DensityMatrix(np.eye(4) / 4))
        np.testing.assert_allclose(t.probs, 0.25, atol=1e-15)

    def test_singlet_anticorrelated_any_direction(self, rng):
        for _ in range(10):
            m = ProjectiveMeasurement.along(rng.normal(size=3))
            t = correlation_table(PSI_MINUS.dm(), [m], [m])
            assert t.probs[0, 0, 0, 1] + t.probs[0, 0, 1, 0] == pytest.approx(1, abs=1e-12)

    def test_invariants_on_random_states(self, rng):
        for _ in range(30):
            t = correlation_table(random_density_matrix(rng))
            np.testing.assert_allclose(t.probs.sum(axis=(2, 3)), 1, atol=1e-12)
            assert t.signaling_error() <= 1e-10

    def test_rejects_signaling_table(self):
        p = np.zeros((1, 2, 2, 2))
        p[0, 0, 0, 0] = 1
        p[0, 1, 1, 1] = 1
        with pytest.raises(ValueError, match="signaling"):
            CorrelationTable(("a",), ("b", "c"), p)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="normalized"):
            CorrelationTable(("a",), ("b",), np.full((1, 1, 2, 2), 0.3))


def test_pauli_settings_complete():
    assert tomographically_complete(PAULI_SETTINGS, PAULI_SETTINGS)
    z = [PAULI_MEASUREMENTS["z"]]
    assert not tomographically_complete(z, z)


class TestClassify:
    def test_identical_states(self):
        v = classify(ETA_Z, ETA_Z)
        assert v.level is Level.NONE and v.evidence is None
        assert v.check(ETA_Z, ETA_Z)

    def test_z_target_vs_x_target_intermediate(self):
        for p in (Party.ALICE, Party.BOB):
            np.testing.assert_allclose(partial_trace(ETA_Z, p).entries, np.eye(2) / 2, atol=1e-15)
            np.testing.assert_allclose(partial_trace(ETA_X, p).entries, np.eye(2) / 2, atol=1e-15)
        zz = np.kron(PAULI_MEASUREMENTS["z"].observable(), PAULI_MEASUREMENTS["z"].observable())
        assert ETA_Z.expect(zz) == pytest.approx(1)
        assert ETA_X.expect(zz) == pytest.approx(0, abs=1e-15)
        v = classify(ETA_Z, ETA_X)
        assert v.level is Level.INTERMEDIATE
        assert v.evidence.kind == "joint"
        assert v.check(ETA_Z, ETA_X)
        assert not v.relative_to_settings

    def test_marginal_difference_strong(self):
        a = DensityMatrix(np.eye(4) / 4)
        b = DensityMatrix(np.kron(np.eye(2) / 2, proj(KET_0)))
        v = classify(a, b)
        assert v.level is Level.STRONG
        assert v.evidence.kind == "bob-marginal"
        assert v.evidence.difference == pytest.approx(0.5)
        assert v.check(a, b)

    def test_incomplete_settings_flagged(self):
        z = [PAULI_MEASUREMENTS["z"]]
        v = classify(ETA_Z, ETA_X, z, z)
        assert v.relative_to_settings
        assert v.level is Level.INTERMEDIATE

    def test_incomplete_settings_can_only_see_weak(self):
        z = [PAULI_MEASUREMENTS["z"]]
        v = classify(ETA_Z, BELL_STATES["phi-plus"].dm(), z, z)
        assert v.level is Level.WEAK and v.relative_to_settings
        assert v.check(ETA_Z, BELL_STATES["phi-plus"].dm())

    def test_never_weak_with_full_settings(self, rng):
        for i in range(500):
            a = random_density_matrix(rng, 4, rank=int(rng.integers(1, 5)))
            if i % 2:
                b = random_density_matrix(rng, 4, rank=int(rng.integers(1, 5)))
            else:
                local = np.kron(partial_trace(a, Party.ALICE).entries, partial_trace(a, Party.BOB).entries)
                b = DensityMatrix(0.5 * a.entries + 0.5 * local)
            v = classify(a, b)
            assert v.level is not Level.WEAK

    def test_symmetric_level(self, rng):
        for _ in range(50):
            a, b = random_density_matrix(rng), random_density_matrix(rng)
            assert classify(a, b).level is classify(b, a).level
        assert classify(ETA_X, ETA_Z).level is Level.INTERMEDIATE

    def test_evidence_recheck_detects_tampering(self):
        v = classify(ETA_Z, ETA_X)
        assert not v.check(ETA_Z, ETA_Z)


def test_strong_verdict_signals(rng):
    """Guessing the time order from the witness marginal beats a coin flip."""
    a = DensityMatrix(np.eye(4) / 4)
    b = DensityMatrix(np.kron(np.eye(2) / 2, proj(KET_0)))
    v = classify(a, b)
    predicted = signaling_success_probability(v)
    p, q = np.array(v.evidence.first), np.array(v.evidence.second)
    trials = 20000
    order = rng.integers(2, size=trials)
    outcome = np.where(order == 0, rng.uniform(size=trials) >= p[0], rng.uniform(size=trials) >= q[0]).astype(int)
    guess = np.where(p[outcome] >= q[outcome], 0, 1)
    rate = float(np.mean(guess == order))
    assert predicted == pytest.approx(0.75)
    assert rate > 0.5
    assert rate == pytest.approx(predicted, abs=0.02)


def test_non_strong_gives_coin_flip():
    assert signaling_success_probability(classify(ETA_Z, ETA_X)) == 0.5


class TestReconstruct:
    def test_phi_plus(self):
        t = correlation_table(PHI_PLUS.dm())
        assert [t.correlator(i, i) for i in range(3)] == pytest.approx([1, -1, 1])
        np.testing.assert_allclose(reconstruct_state(t).entries, PHI_PLUS.dm().entries, atol=1e-12)

    def test_maximally_mixed(self):
        t = correlation_table(DensityMatrix(np.eye(4) / 4))
        np.testing.assert_allclose(reconstruct_state(t).entries, np.eye(4) / 4, atol=1e-15)

    def test_singlet(self):
        t = correlation_table(PSI_MINUS.dm())
        np.testing.assert_allclose(reconstruct_state(t).entries, PSI_MINUS.dm().entries, atol=1e-12)

    def test_round_trip(self, rng):
        for _ in range(200):
            rho = random_density_matrix(rng, 4, rank=int(rng.integers(1, 5)))
            back = reconstruct_state(correlation_table(rho))
            assert np.max(np.abs(back.entries - rho.entries)) <= 1e-9

    def test_non_quantum_table(self):
        p = np.full((3, 3, 2, 2), 0.25)
        for i in range(3):
            p[i, i] = [[0.5, 0], [0, 0.5]]  # perfect correlation in x, y and z at once
        t = CorrelationTable(PAULI_SETTINGS, PAULI_SETTINGS, p)
        with pytest.raises(NonQuantumDataError):
            reconstruct_state(t)

    def test_requires_pauli_settings(self):
        z = [PAULI_MEASUREMENTS["z"]]
        with pytest.raises(ValueError):
            reconstruct_state(correlation_table(PHI_PLUS.dm(), z, z))
