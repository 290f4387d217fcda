"""Constraint sets for the flip device's output on half of a singlet.

If the flip device acts first, the joint state is some unknown ``chi``.
Alice's later measurement must then reproduce the state obtained in the
opposite order (measure first, flip the pure conditional state second),
otherwise the time order of two spacelike operations would be observable.

For a rank-1 measurement with outcome projectors ``P_i`` the requirement is
``Σ_i (P_i ⊗ I) chi (P_i ⊗ I) = eta``. Each block of ``eta`` is rank one,
``w_i |a_i><a_i|`` with ``a_i`` a product ket, so positivity of ``chi``
forces its support into ``span{a_0, a_1}`` and the solution set is

    diag = (w_0, w_1),   |<a_0|chi|a_1>| <= sqrt(w_0 w_1),   zero elsewhere,

which is the convex hull of ``sqrt(w_0) a_0 + e^{iφ} sqrt(w_1) a_1``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .dynamics import PureFlip, TimeOrderedExperiment, run
from .qcore import (
    BELL_STATES,
    PAULI_MEASUREMENTS,
    PSI_MINUS,
    DensityMatrix,
    Ket,
    Party,
    ProjectiveMeasurement,
    embed,
    fix_global_phase,
    partial_trace,
    trace_distance,
)

MEMBERSHIP_TOL = 1e-9
MIN_PERTURBATION = 1e-6
WITNESS_TOL = 1e-8

PHASE_SYMBOLS = {"z": "α", "x": "β", "y": "δ"}


@dataclass(frozen=True, eq=False)
class PhaseFamily:
    """Hull of ``sqrt(w_0) a + e^{iφ} sqrt(w_1) b`` over the free phase φ."""

    family_id: str
    basis_pair: tuple  # (Ket a, Ket b), both product kets
    labels: tuple  # text names of a and b, e.g. ("xx", "x̄x̄")
    phase_symbol: str
    weights: tuple = (0.5, 0.5)
    target: DensityMatrix | None = None

    def extreme_state(self, phase: float) -> Ket:
        a, b = (k.amplitudes for k in self.basis_pair)
        w0, w1 = self.weights
        return Ket(np.sqrt(w0) * a + np.exp(1j * phase) * np.sqrt(w1) * b)

    def extreme_dm(self, phase: float) -> np.ndarray:
        v = self.extreme_state(phase).amplitudes
        return np.outer(v, v.conj())

    @property
    def max_coherence(self) -> float:
        return float(np.sqrt(self.weights[0] * self.weights[1]))

    def frame(self) -> np.ndarray:
        """Unitary with columns ``a, b`` followed by an orthonormal complement."""
        ab = np.column_stack([k.amplitudes for k in self.basis_pair])
        comp = null_space(ab.conj().T)
        return np.column_stack([ab, comp])

    def span_text(self) -> str:
        return "span{|%s⟩,|%s⟩}" % self.labels

    def coherence_point(self, phase: float) -> complex:
        """``<a|ε(φ)><ε(φ)|b>``: where the extreme state sits in the coherence disk."""
        return complex(self.max_coherence * np.exp(-1j * phase))


def _joint_label(la: str, lb: str) -> str:
    return la + lb


def ac_constraint_set(alice_m: ProjectiveMeasurement, shared: DensityMatrix | None = None) -> PhaseFamily:
    """All ``chi`` compatible with measuring ``alice_m`` before the flip.

    The target is computed by running the measure-then-flip order; the family
    is read off its outcome blocks.
    """
    if alice_m.dim != 2 or len(alice_m.projectors) != 2 or not alice_m.is_rank_one:
        raise ValueError("Alice's measurement must be a rank-1 projective qubit measurement")
    shared = PSI_MINUS.dm() if shared is None else shared
    kets = alice_m.kets
    if kets is None:
        kets = tuple(Ket.normalized(np.linalg.eigh(p)[1][:, -1]).canonical() for p in alice_m.projectors)
    target = run(TimeOrderedExperiment(shared, ((Party.ALICE, alice_m), (Party.BOB, PureFlip())), "alice-first"))
    basis, weights, labels = [], [], []
    for proj, u, label in zip(alice_m.projectors, kets, alice_m.labels):
        op = embed(proj, Party.ALICE)
        block = op @ target.entries @ op
        w = float(np.trace(block).real)
        if w < 1e-12:
            raise ValueError(f"outcome {label!r} never occurs on the shared state")
        bob = partial_trace(DensityMatrix(block / w), Party.BOB).entries
        evals, evecs = np.linalg.eigh(bob)
        if evals[-1] < 1 - 1e-9:
            raise ValueError(f"outcome {label!r}: flipped conditional state is not pure")
        v = evecs[:, -1]
        overlap = np.vdot(u.amplitudes, v)
        v = v * (abs(overlap) / overlap) if abs(overlap) > 1e-9 else fix_global_phase(v)
        basis.append(Ket(np.kron(u.amplitudes, v / np.linalg.norm(v))))
        weights.append(w)
        # Bob's flipped state coincides with Alice's outcome ket for the singlet.
        blabel = label if abs(abs(overlap) - 1) < 1e-9 else f"{label}'"
        labels.append(_joint_label(label, blabel))
    return PhaseFamily(
        family_id=alice_m.name,
        basis_pair=tuple(basis),
        labels=tuple(labels),
        phase_symbol=PHASE_SYMBOLS.get(alice_m.name, "φ"),
        weights=tuple(weights),
        target=target,
    )


def pauli_families() -> dict[str, PhaseFamily]:
    return {k: ac_constraint_set(PAULI_MEASUREMENTS[k]) for k in ("z", "x", "y")}


# --- membership --------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintViolation:
    kind: str  # "support" | "diagonal" | "coherence"
    description: str
    value: float
    bound: float

    def recheck(self, chi, fam: PhaseFamily) -> bool:
        return any(v.kind == self.kind for v in violations(chi, fam))


@dataclass(frozen=True)
class Decomposition:
    phases: tuple
    weights: tuple

    def reconstruct(self, fam: PhaseFamily) -> np.ndarray:
        return sum(w * fam.extreme_dm(p) for p, w in zip(self.phases, self.weights))


@dataclass(frozen=True)
class FeasibilityReport:
    family_id: str
    member: bool
    witness: Decomposition | ConstraintViolation

    def verify(self, chi, fam: PhaseFamily) -> bool:
        if self.member:
            err = np.max(np.abs(self.witness.reconstruct(fam) - _matrix(chi)))
            return bool(err <= WITNESS_TOL)
        return self.witness.recheck(chi, fam)


def _matrix(chi) -> np.ndarray:
    return np.asarray(chi.entries if isinstance(chi, DensityMatrix) else chi, dtype=complex)


def framed(chi, fam: PhaseFamily) -> np.ndarray:
    v = fam.frame()
    return v.conj().T @ _matrix(chi) @ v


def violations(chi, fam: PhaseFamily, tol: float = MEMBERSHIP_TOL) -> list[ConstraintViolation]:
    """Every broken constraint of the block characterization."""
    m = framed(chi, fam)
    found = []
    leak = float(np.linalg.norm(m[2:, :]))  # ‖Qχ‖_F, Q = projector off the span
    if leak > tol:
        weight = float(np.trace(m[2:, 2:]).real)
        found.append(ConstraintViolation(
            "support", f"support leaks outside {fam.span_text()} (‖Qχ‖ = {leak:.6g}, weight {weight:.6g})",
            leak, tol))
    for i, (w, lab) in enumerate(zip(fam.weights, fam.labels)):
        dev = abs(m[i, i].real - w)
        if dev > tol:
            found.append(ConstraintViolation(
                "diagonal", f"weight on |{lab}⟩ is {m[i, i].real:.12g}, required {w:.12g}", float(dev), tol))
    coh = abs(m[0, 1])
    if coh > fam.max_coherence + tol:
        found.append(ConstraintViolation(
            "coherence", f"coherence modulus {coh:.12g} exceeds {fam.max_coherence:.12g}",
            float(coh), fam.max_coherence + tol))
    return found


def membership(chi, fam: PhaseFamily, tol: float = MEMBERSHIP_TOL) -> FeasibilityReport:
    """Decide ``chi ∈ Ch{extreme states of fam}`` and attach a checkable witness."""
    bad = violations(chi, fam, tol)
    if bad:
        return FeasibilityReport(fam.family_id, False, bad[0])
    c = framed(chi, fam)[0, 1]
    z = np.conj(c) / fam.max_coherence  # Σ_k w_k e^{iφ_k}
    r = min(abs(z), 1.0)
    if r >= 1 - 1e-12:
        dec = Decomposition((float(np.angle(z) % (2 * np.pi)),), (1.0,))
    else:
        theta = float(np.angle(z)) if r > 1e-12 else np.pi / 2
        gamma = float(np.arccos(r))
        dec = Decomposition(((theta - gamma) % (2 * np.pi), (theta + gamma) % (2 * np.pi)), (0.5, 0.5))
    return FeasibilityReport(fam.family_id, True, dec)


# --- intersections -----------------------------------------------------------

def _hermitian_basis() -> list[np.ndarray]:
    basis = []
    for i in range(4):
        for j in range(i, 4):
            e = np.zeros((4, 4), dtype=complex)
            if i == j:
                e[i, i] = 1
                basis.append(e)
            else:
                e[i, j] = e[j, i] = 1
                basis.append(e)
                f = np.zeros((4, 4), dtype=complex)
                f[i, j], f[j, i] = 1j, -1j
                basis.append(f)
    return basis


_HBASIS = _hermitian_basis()


def linear_constraints(fam: PhaseFamily) -> tuple[np.ndarray, np.ndarray]:
    """Real system ``A x = y`` for the equality part of the characterization.

    ``x`` holds coordinates of a Hermitian 4x4 matrix in a fixed real basis.
    """
    v = fam.frame()
    funcs, rhs = [], []
    for p in range(4):
        for q in range(p, 4):
            if p >= 2 or q >= 2:
                funcs.append((p, q, "re"))
                rhs.append(0.0)
                if p != q:
                    funcs.append((p, q, "im"))
                    rhs.append(0.0)
    for i, w in enumerate(fam.weights):
        funcs.append((i, i, "re"))
        rhs.append(w)
    a = np.empty((len(funcs), len(_HBASIS)))
    for k, g in enumerate(_HBASIS):
        m = v.conj().T @ g @ v
        for r, (p, q, part) in enumerate(funcs):
            a[r, k] = m[p, q].real if part == "re" else m[p, q].imag
    return a, np.array(rhs)


def _from_coords(x: np.ndarray) -> np.ndarray:
    return sum(c * g for c, g in zip(x, _HBASIS))


@dataclass(frozen=True)
class Intersection:
    family_ids: tuple
    consistent: bool
    residual: float
    affine_dim: int
    points: tuple = field(default=())
    note: str = ""

    @property
    def empty(self) -> bool:
        return not self.points and (not self.consistent or self.affine_dim == 0)


def intersect(*families: PhaseFamily, tol: float = MEMBERSHIP_TOL) -> Intersection:
    """States satisfying every family's characterization simultaneously.

    Solves the stacked equality constraints, certifies the dimension of the
    solution set, then checks the inequality part on an isolated solution.
    """
    ids = tuple(f.family_id for f in families)
    blocks = [linear_constraints(f) for f in families]
    a = np.vstack([b[0] for b in blocks])
    y = np.concatenate([b[1] for b in blocks])
    x, *_ = np.linalg.lstsq(a, y, rcond=None)
    residual = float(np.linalg.norm(a @ x - y))
    sv = np.linalg.svd(a, compute_uv=False)
    rank = int(np.sum(sv > 1e-9 * sv[0]))
    dim = a.shape[1] - rank
    if residual > tol:
        return Intersection(ids, False, residual, dim, (), "linear constraints inconsistent")
    if dim > 0:
        return Intersection(ids, True, residual, dim, (), f"solution set is a {dim}-dimensional affine slice")
    chi = _from_coords(x)
    if np.linalg.eigvalsh(chi).min() < -1e-10:
        return Intersection(ids, True, residual, 0, (), "unique linear solution is not positive")
    for f in families:
        if not membership(chi, f, tol).member:
            return Intersection(ids, True, residual, 0, (), f"unique linear solution fails family {f.family_id}")
    return Intersection(ids, True, residual, 0, (DensityMatrix(chi),), "unique solution")


def name_bell_state(rho: DensityMatrix, tol: float = MEMBERSHIP_TOL) -> tuple[str | None, float]:
    best = min(((trace_distance(rho, k.dm()), name) for name, k in BELL_STATES.items()))
    return (best[1] if best[0] <= tol else None), best[0]


# --- certificate -------------------------------------------------------------

@dataclass
class Theorem1Certificate:
    families: dict
    pairwise: list
    exclusions: list
    triple: dict
    lp_cross_check: dict
    passed: bool

    def to_dict(self) -> dict:
        return {
            "families": self.families,
            "pairwise": self.pairwise,
            "exclusions": self.exclusions,
            "triple": self.triple,
            "lp_cross_check": self.lp_cross_check,
            "passed": self.passed,
        }


def _matrix_rows(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def verify_theorem1(grid: int = 720, tol: float = MEMBERSHIP_TOL) -> Theorem1Certificate:
    """Certify that no single ``chi`` satisfies all three Pauli constraint sets."""
    from .oracle import lp_common_point_gap

    fams = pauli_families()
    fam_info = {
        k: {
            "basis": list(f.labels),
            "phase_symbol": f.phase_symbol,
            "weights": list(f.weights),
            "target": _matrix_rows(f.target.entries),
        }
        for k, f in fams.items()
    }
    pairwise, exclusions = [], []
    ok = True
    for k1, k2 in itertools.combinations(fams, 2):
        inter = intersect(fams[k1], fams[k2], tol=tol)
        entry = {"families": [k1, k2], "note": inter.note, "affine_dim": inter.affine_dim,
                 "residual": inter.residual, "state": None, "bell_state": None, "trace_distance": None}
        if len(inter.points) != 1:
            ok = False
        else:
            point = inter.points[0]
            name, dist = name_bell_state(point, tol)
            entry.update(state=_matrix_rows(point.entries), bell_state=name, trace_distance=dist)
            ok &= name is not None
            third = next(k for k in fams if k not in (k1, k2))
            rep = membership(point, fams[third], tol)
            ok &= (not rep.member) and rep.verify(point, fams[third])
            exclusions.append({
                "state": name,
                "family": third,
                "member": rep.member,
                "violation": getattr(rep.witness, "description", None),
                "kind": getattr(rep.witness, "kind", None),
            })
        pairwise.append(entry)
    triple = intersect(*fams.values(), tol=tol)
    ok &= triple.empty
    gaps = {
        "+".join(pair): lp_common_point_gap([fams[k] for k in pair], grid)
        for pair in itertools.combinations(fams, 2)
    }
    gaps["z+x+y"] = lp_common_point_gap(list(fams.values()), grid)
    ok &= gaps["z+x+y"] > 1e-6 and all(v <= 1e-8 for k, v in gaps.items() if k.count("+") == 1)
    return Theorem1Certificate(
        families=fam_info,
        pairwise=pairwise,
        exclusions=exclusions,
        triple={"empty": triple.empty, "consistent": triple.consistent, "residual": triple.residual,
                "affine_dim": triple.affine_dim, "note": triple.note},
        lp_cross_check={"grid": grid, "gaps": gaps},
        passed=bool(ok),
    )
