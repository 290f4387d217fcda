import numpy as np
import pytest

from acflip.acceptance import membership_instances
from acflip.dynamics import PureFlip, TimeOrderedExperiment, run
from acflip.oracle import lp_common_point_gap, lp_membership, lp_membership_batch
from acflip.qcore import (
    BELL_STATES,
    KET_0,
    KET_1,
    KET_X,
    KET_XBAR,
    KET_Y,
    KET_YBAR,
    PAULI_MEASUREMENTS,
    PSI_MINUS,
    DensityMatrix,
    Party,
    ProjectiveMeasurement,
    embed,
    measure_update,
    partial_trace,
    random_density_matrix,
    trace_distance,
)
from acflip.theorem1 import (
    ac_constraint_set,
    intersect,
    membership,
    pauli_families,
    verify_theorem1,
    violations,
)


@pytest.fixture(scope="module")
def fams():
    return pauli_families()


@pytest.fixture(scope="module")
def certificate():
    return verify_theorem1()


def span_projector(kets):
    return sum(np.outer(k.amplitudes, k.amplitudes.conj()) for k in kets)


def dephase(chi, m):
    ops = [embed(p, Party.ALICE) for p in m.projectors]
    return sum(o @ chi @ o for o in ops)


class TestFamilies:
    @pytest.mark.parametrize("key,pair", [
        ("z", (KET_0, KET_1)), ("x", (KET_X, KET_XBAR)), ("y", (KET_Y, KET_YBAR)),
    ])
    def test_basis_pairs(self, fams, key, pair):
        fam = fams[key]
        expected = span_projector([pair[0] @ pair[0], pair[1] @ pair[1]])
        np.testing.assert_allclose(span_projector(fam.basis_pair), expected, atol=1e-12)

    def test_z_extreme_state_formula(self, fams):
        for alpha in np.linspace(0, 2 * np.pi, 13):
            expected = (np.kron([1, 0], [1, 0]) + np.exp(1j * alpha) * np.kron([0, 1], [0, 1])) / np.sqrt(2)
            got = fams["z"].extreme_state(alpha).amplitudes
            assert abs(abs(np.vdot(expected, got)) - 1) < 1e-12

    def test_phase_symbols(self, fams):
        assert [fams[k].phase_symbol for k in "zxy"] == ["α", "β", "δ"]

    def test_extreme_states_maximally_entangled(self, fams):
        for fam in fams.values():
            for phase in np.linspace(0, 2 * np.pi, 17):
                rho = DensityMatrix(fam.extreme_dm(phase))
                for party in Party:
                    np.testing.assert_allclose(partial_trace(rho, party).entries, np.eye(2) / 2, atol=1e-10)

    def test_dephasing_reproduces_target(self, fams):
        for key, fam in fams.items():
            m = PAULI_MEASUREMENTS[key]
            target = run(TimeOrderedExperiment(PSI_MINUS.dm(), ((Party.ALICE, m), (Party.BOB, PureFlip()))))
            np.testing.assert_allclose(fam.target.entries, target.entries, atol=1e-15)
            for phase in np.linspace(0, 2 * np.pi, 50):
                assert np.max(np.abs(dephase(fam.extreme_dm(phase), m) - target.entries)) <= 1e-12

    def test_eta_z_is_displayed_state(self, fams):
        np.testing.assert_allclose(fams["z"].target.entries, np.diag([0.5, 0, 0, 0.5]), atol=1e-15)

    def test_rejects_non_rank_one(self):
        m = ProjectiveMeasurement((np.eye(2),), ("all",))
        with pytest.raises(ValueError):
            ac_constraint_set(m)

    def test_rotational_covariance(self, rng, fams):
        z = fams["z"]
        for _ in range(20):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            m = ProjectiveMeasurement.along(n)
            fam = ac_constraint_set(m)
            # local unitary taking |0>,|1> to the measurement kets, applied on both sides
            u = np.column_stack([k.amplitudes for k in m.kets])
            uu = np.kron(u, u)
            np.testing.assert_allclose(fam.target.entries, uu @ z.target.entries @ uu.conj().T, atol=1e-12)
            np.testing.assert_allclose(span_projector(fam.basis_pair),
                                       uu @ span_projector(z.basis_pair) @ uu.conj().T, atol=1e-12)
            for phase in np.linspace(0, 2 * np.pi, 5, endpoint=False):
                rotated = uu @ z.extreme_dm(phase) @ uu.conj().T
                assert membership(rotated, fam).member
                assert np.max(np.abs(dephase(rotated, m) - fam.target.entries)) <= 1e-12


class TestMembership:
    def test_phi_plus_in_z(self, fams):
        rep = membership(BELL_STATES["phi-plus"].dm(), fams["z"])
        assert rep.member
        assert rep.witness.phases == pytest.approx((0.0,), abs=1e-9)
        assert rep.witness.weights == (1.0,)
        assert rep.verify(BELL_STATES["phi-plus"].dm(), fams["z"])

    def test_singlet_not_in_z(self, fams):
        rep = membership(PSI_MINUS.dm(), fams["z"])
        assert not rep.member
        assert rep.witness.kind == "support"
        assert rep.verify(PSI_MINUS.dm(), fams["z"])

    def test_eta_z_is_equal_phase_mixture(self, fams):
        eta = fams["z"].target
        rep = membership(eta, fams["z"])
        assert rep.member
        phases = sorted(rep.witness.phases)
        assert phases == pytest.approx([0.0, np.pi], abs=1e-12)
        assert rep.witness.weights == (0.5, 0.5)
        assert lp_membership(eta, fams["z"])[0]

    def test_witnesses_reconstruct(self, rng, fams):
        for fam in fams.values():
            states, labels = membership_instances(fam, rng, 400)
            for chi, lab in zip(states, labels):
                rep = membership(chi, fam)
                assert rep.member == lab
                assert rep.verify(chi, fam)
                if rep.member:
                    assert len(rep.witness.phases) <= 2
                    assert np.max(np.abs(rep.witness.reconstruct(fam) - chi)) <= 1e-9

    def test_closed_form_on_thousand_each(self, rng, fams):
        for fam in fams.values():
            states, labels = membership_instances(fam, rng, 2000)
            assert sum(labels) == 1000
            assert all(membership(s, fam).member == lab for s, lab in zip(states, labels))

    def test_agrees_with_lp_oracle(self, rng, fams):
        for fam in fams.values():
            states, labels = membership_instances(fam, rng, 200)
            lp = lp_membership_batch(states, fam)
            assert [m for m, _ in lp] == labels
            assert [membership(s, fam).member for s in states] == labels

    def test_random_full_rank_states_are_outside(self, rng, fams):
        for _ in range(50):
            chi = random_density_matrix(rng)
            for fam in fams.values():
                assert not membership(chi, fam).member

    def test_coherence_violation_on_raw_matrix(self, fams):
        m = np.diag([0.5, 0, 0, 0.5]).astype(complex)
        m[0, 3] = m[3, 0] = 0.6
        found = violations(m, fams["z"])
        assert [v.kind for v in found] == ["coherence"]

    def test_tiny_negative_eigenvalue_still_decided_exactly(self, fams):
        m = np.diag([0.5, 0, 0, 0.5]).astype(complex)
        m[0, 3] = m[3, 0] = 0.5 + 5e-11
        chi = DensityMatrix(m)
        assert np.linalg.eigvalsh(chi.entries).min() < 0
        assert membership(chi, fams["z"]).member
        m[0, 0], m[3, 3] = 0.5 + 1e-6, 0.5 - 1e-6
        assert not membership(m, fams["z"]).member


def test_outcome_conditioned_equivalence(rng, fams):
    """Averaged-state equality and per-outcome equality decide the same states."""
    for key, fam in fams.items():
        m = PAULI_MEASUREMENTS[key]
        target_branches = {b.label: b for b in measure_update(fam.target, m, Party.ALICE)[0]}
        states, _ = membership_instances(fam, rng, 200)
        states += [random_density_matrix(rng).entries for _ in range(20)]
        for chi in states:
            averaged = np.max(np.abs(dephase(chi, m) - fam.target.entries)) <= 1e-9
            ens = {b.label: b for b in measure_update(DensityMatrix(chi), m, Party.ALICE)[0]}
            conditioned = set(ens) == set(target_branches) and all(
                abs(ens[k].probability - target_branches[k].probability) <= 1e-9
                and trace_distance(ens[k].state, target_branches[k].state) <= 1e-8
                for k in ens
            )
            assert averaged == conditioned


class TestIntersections:
    @pytest.mark.parametrize("pair,bell", [(("z", "x"), "phi-plus"), (("z", "y"), "phi-minus"),
                                           (("y", "x"), "psi-plus")])
    def test_pairwise_points(self, fams, pair, bell):
        inter = intersect(fams[pair[0]], fams[pair[1]])
        assert inter.consistent and inter.affine_dim == 0
        assert len(inter.points) == 1
        assert trace_distance(inter.points[0], BELL_STATES[bell].dm()) <= 1e-9

    def test_triple_empty(self, fams):
        inter = intersect(*fams.values())
        assert inter.empty and not inter.consistent
        assert inter.residual > 0.1

    def test_lp_gap(self, fams):
        assert lp_common_point_gap(list(fams.values()), 720) > 1e-3
        assert lp_common_point_gap([fams["z"], fams["x"]], 720) <= 1e-8


class TestCertificate:
    def test_passes(self, certificate):
        assert certificate.passed
        assert certificate.triple["empty"]

    def test_phi_plus_excluded_from_y_by_support(self, certificate):
        entry = next(e for e in certificate.exclusions if e["state"] == "phi-plus")
        assert entry["family"] == "y"
        assert entry["kind"] == "support"
        assert "yy" in entry["violation"]

    def test_each_point_violates_third_family(self, certificate):
        assert {(e["state"], e["family"]) for e in certificate.exclusions} == {
            ("phi-plus", "y"), ("phi-minus", "x"), ("psi-plus", "z")}
        assert not any(e["member"] for e in certificate.exclusions)

    def test_reproducible(self, certificate):
        assert verify_theorem1().to_dict() == certificate.to_dict()
