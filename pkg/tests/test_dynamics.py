import numpy as np
import pytest

from acflip.channels import depolarizing, random_channel
from acflip.dynamics import (
    BlackBoxJoint,
    Cptp,
    EnsembleMap,
    LocalEnsemble,
    PureFlip,
    TimeOrderedExperiment,
    UndefinedActionError,
    Unitary,
    apply_local,
    bob_flip_hypothesis,
    order_swap_residual,
    run,
    run_branches,
    swapped,
)
from acflip.qcore import (
    I2,
    KET_0,
    KET_1,
    KET_X,
    KET_XBAR,
    PAULI_MEASUREMENTS,
    PAULI_X,
    PHI_PLUS,
    PSI_MINUS,
    DensityMatrix,
    Party,
    ProjectiveMeasurement,
    measure_update,
    random_density_matrix,
    random_unitary,
    trace_distance,
)
from acflip.scenario import g_rule

ETA_Z = np.diag([0.5, 0, 0, 0.5]).astype(complex)
G_MAP = EnsembleMap(g_rule, "g-map")


def proj(ket):
    return np.outer(ket.amplitudes, ket.amplitudes.conj())


def experiment(*steps, initial=None, label="", ensemble="proper"):
    return TimeOrderedExperiment(initial or PSI_MINUS.dm(), tuple(steps), label, ensemble)


class TestApplyLocal:
    def test_flip_on_z_ensemble_gives_eta(self):
        sigma = measure_update(PSI_MINUS.dm(), PAULI_MEASUREMENTS["z"], Party.ALICE)[1]
        ens = LocalEnsemble.steered(PSI_MINUS.dm(), PAULI_MEASUREMENTS["z"], Party.ALICE)
        np.testing.assert_allclose(ens.average().entries, sigma.entries, atol=1e-15)
        out = apply_local(EnsembleMap(PureFlip().rule, "flip"), Party.BOB, ens)
        np.testing.assert_allclose(out.entries, ETA_Z, atol=1e-15)

    def test_unitary_on_bob(self):
        out = apply_local(Unitary(PAULI_X), Party.BOB, (KET_0 @ KET_0).dm())
        np.testing.assert_allclose(out.entries, proj(KET_0 @ KET_1))

    def test_g_rule_on_x_ensemble(self):
        ens = LocalEnsemble.steered(PSI_MINUS.dm(), PAULI_MEASUREMENTS["x"], Party.ALICE)
        out = apply_local(G_MAP, Party.BOB, ens)
        alice = 0.5 * (proj(KET_X) + proj(KET_XBAR))
        np.testing.assert_allclose(out.entries, np.kron(alice, proj(KET_0)), atol=1e-12)

    def test_flip_on_entangled_half_is_undefined(self):
        with pytest.raises(UndefinedActionError):
            apply_local(PureFlip(), Party.BOB, PSI_MINUS.dm())

    def test_flip_on_mixed_half_is_undefined(self):
        with pytest.raises(UndefinedActionError):
            apply_local(PureFlip(), Party.BOB, DensityMatrix(np.eye(4) / 4))

    def test_flip_on_pure_product_factor(self):
        out = apply_local(PureFlip(), Party.BOB, (KET_X @ KET_0).dm())
        np.testing.assert_allclose(out.entries, proj(KET_X @ KET_1), atol=1e-15)

    def test_hypothesis_lookup(self):
        flip = PureFlip(bob_flip_hypothesis(PSI_MINUS.dm(), PHI_PLUS.dm()))
        out = apply_local(flip, Party.BOB, PSI_MINUS.dm())
        np.testing.assert_allclose(out.entries, proj(PHI_PLUS))

    def test_black_box_miss(self):
        box = BlackBoxJoint((("singlet", PSI_MINUS.dm(), PHI_PLUS.dm()),))
        with pytest.raises(UndefinedActionError):
            apply_local(box, Party.BOB, PHI_PLUS.dm())

    def test_wrong_target_party(self):
        ens = LocalEnsemble.steered(PSI_MINUS.dm(), PAULI_MEASUREMENTS["z"], Party.ALICE)
        with pytest.raises(UndefinedActionError):
            apply_local(PureFlip(), Party.ALICE, ens)

    def test_unitary_invariant(self):
        with pytest.raises(ValueError):
            Unitary(np.array([[1, 1], [0, 1]]))


def test_g_map_depends_on_decomposition():
    # two decompositions of |0><0| ⊗ I/2
    other = KET_0.dm()
    z_dec = LocalEnsemble(Party.BOB, ((0.5, other, KET_0), (0.5, other, KET_1)))
    x_dec = LocalEnsemble(Party.BOB, ((0.5, other, KET_X), (0.5, other, KET_XBAR)))
    np.testing.assert_allclose(z_dec.average().entries, x_dec.average().entries, atol=1e-15)
    out_z = apply_local(G_MAP, Party.BOB, z_dec)
    out_x = apply_local(G_MAP, Party.BOB, x_dec)
    np.testing.assert_allclose(out_z.entries, np.kron(proj(KET_0), I2 / 2), atol=1e-15)
    np.testing.assert_allclose(out_x.entries, np.kron(proj(KET_0), proj(KET_0)), atol=1e-15)
    assert trace_distance(out_z, out_x) == pytest.approx(0.5)


class TestRun:
    def test_measure_z_then_flip(self):
        exp = experiment((Party.ALICE, PAULI_MEASUREMENTS["z"]), (Party.BOB, PureFlip()))
        np.testing.assert_allclose(run(exp).entries, ETA_Z, atol=1e-15)

    def test_identities(self):
        ident = Unitary(I2, "identity")
        exp = experiment((Party.ALICE, ident), (Party.BOB, ident))
        np.testing.assert_allclose(run(exp).entries, proj(PSI_MINUS), atol=1e-15)

    def test_measure_x_then_flip(self):
        exp = experiment((Party.ALICE, PAULI_MEASUREMENTS["x"]), (Party.BOB, PureFlip()))
        expected = 0.5 * (proj(KET_X @ KET_X) + proj(KET_XBAR @ KET_XBAR))
        np.testing.assert_allclose(run(exp).entries, expected, atol=1e-12)

    def test_flip_first_without_hypothesis_fails(self):
        exp = experiment((Party.BOB, PureFlip()), (Party.ALICE, PAULI_MEASUREMENTS["z"]))
        with pytest.raises(UndefinedActionError):
            run(exp)

    def test_improper_mode_loses_branches(self):
        exp = experiment((Party.ALICE, PAULI_MEASUREMENTS["z"]), (Party.BOB, PureFlip()), ensemble="improper")
        with pytest.raises(UndefinedActionError):
            run(exp)

    def test_branch_labels(self):
        exp = experiment((Party.ALICE, PAULI_MEASUREMENTS["z"]), (Party.BOB, PAULI_MEASUREMENTS["x"]))
        branches = run_branches(exp)
        assert len(branches) == 4
        assert sum(b.probability for b in branches) == pytest.approx(1)
        assert {b.label for b in branches} == {"0/x", "0/x̄", "1/x", "1/x̄"}

    def test_bit_identical(self, rng):
        rho = random_density_matrix(rng)
        exp = experiment((Party.ALICE, Cptp(random_channel(rng))), (Party.BOB, Unitary(random_unitary(rng))),
                         initial=rho)
        assert np.array_equal(run(exp).entries, run(exp).entries)

    def test_bad_ensemble_mode(self):
        with pytest.raises(ValueError):
            experiment(ensemble="quantum")


class TestOrderSwap:
    def test_measure_and_unitary(self):
        exp = experiment((Party.ALICE, PAULI_MEASUREMENTS["z"]), (Party.BOB, Unitary(PAULI_X, "x")))
        assert order_swap_residual(exp, swapped(exp)) <= 1e-15

    def test_measure_and_depolarizing(self):
        exp = experiment((Party.ALICE, PAULI_MEASUREMENTS["z"]), (Party.BOB, Cptp(depolarizing(0.4), "dep")))
        assert order_swap_residual(exp, swapped(exp)) <= 1e-15

    def test_declared_hypothesis(self):
        flip = PureFlip(bob_flip_hypothesis(PSI_MINUS.dm(), PHI_PLUS.dm()))
        for key, expected in (("z", 0.0), ("y", 1.0)):
            m = PAULI_MEASUREMENTS[key]
            alice_first = experiment((Party.ALICE, m), (Party.BOB, flip))
            assert order_swap_residual(alice_first, swapped(alice_first)) == pytest.approx(expected, abs=1e-12)

    def test_requires_same_steps(self):
        a = experiment((Party.ALICE, PAULI_MEASUREMENTS["z"]))
        b = experiment((Party.ALICE, PAULI_MEASUREMENTS["x"]))
        with pytest.raises(ValueError):
            order_swap_residual(a, b)

    def test_random_linear_pairs(self, rng):
        worst = 0.0
        for _ in range(200):
            ops = []
            for _ in range(2):
                kind = rng.integers(3)
                if kind == 0:
                    ops.append(Unitary(random_unitary(rng)))
                elif kind == 1:
                    ops.append(Cptp(random_channel(rng, int(rng.integers(1, 5)))))
                else:
                    ops.append(ProjectiveMeasurement.along(rng.normal(size=3)))
            exp = experiment((Party.ALICE, ops[0]), (Party.BOB, ops[1]), initial=random_density_matrix(rng))
            worst = max(worst, order_swap_residual(exp, swapped(exp)))
        assert worst <= 1e-10
