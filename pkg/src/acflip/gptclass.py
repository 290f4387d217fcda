"""Classification of time-order dependence by what local observers can see.

Two final joint states, one per time order, are compared at three levels:

* strong: some single-party outcome distribution differs (signaling);
* intermediate: marginals agree but some product-setting joint distribution differs;
* weak: all product statistics agree yet the states differ.

The classifier is instantiated for two qubits with projective product settings.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qcore import (
    I2,
    PAULI_MEASUREMENTS,
    DensityMatrix,
    InvalidStateError,
    ProjectiveMeasurement,
    trace_distance,
)

DIFFER_TOL = 1e-9
NORMALIZATION_TOL = 1e-12
NO_SIGNALING_TOL = 1e-10
RECONSTRUCT_EIG_FLOOR = -1e-9

PAULI_SETTINGS = tuple(PAULI_MEASUREMENTS[k] for k in "xyz")


class NonQuantumDataError(ValueError):
    """Correlation data admit no positive two-qubit state."""


class Level(str, enum.Enum):
    NONE = "none"
    WEAK = "weak"
    INTERMEDIATE = "intermediate"
    STRONG = "strong"


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    """``probs[x, y, a, b] = p(a, b | x, y)`` for Alice setting x and Bob setting y."""

    alice_settings: tuple
    bob_settings: tuple
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        sums = p.sum(axis=(2, 3))
        if np.max(np.abs(sums - 1)) > NORMALIZATION_TOL:
            raise ValueError("joint distributions are not normalized")
        if self.signaling_error() > NO_SIGNALING_TOL:
            raise ValueError(f"table is signaling (deviation {self.signaling_error():.3e})")

    def alice_marginal(self, x: int) -> np.ndarray:
        return self.probs[x].sum(axis=2).mean(axis=0)

    def bob_marginal(self, y: int) -> np.ndarray:
        return self.probs[:, y].sum(axis=1).mean(axis=0)

    def signaling_error(self) -> float:
        pa = self.probs.sum(axis=3)  # [x, y, a]
        pb = self.probs.sum(axis=2)  # [x, y, b]
        return float(max(np.max(np.abs(pa - pa[:, :1])), np.max(np.abs(pb - pb[:1])))) if self.probs.size else 0.0

    def correlator(self, x: int, y: int) -> float:
        """``<A_x ⊗ B_y>`` with outcome 0 ↦ +1 and outcome 1 ↦ -1."""
        s = np.array([1.0, -1.0])
        return float(np.einsum("a,b,ab->", s, s, self.probs[x, y]))


def correlation_table(
    rho: DensityMatrix,
    alice_settings: Sequence[ProjectiveMeasurement] = PAULI_SETTINGS,
    bob_settings: Sequence[ProjectiveMeasurement] = PAULI_SETTINGS,
) -> CorrelationTable:
    """Born-rule statistics of ``rho`` for every product of the given settings."""
    if rho.dim != 4:
        raise InvalidStateError("correlation_table expects a two-qubit state")
    na = max(len(m.projectors) for m in alice_settings)
    nb = max(len(m.projectors) for m in bob_settings)
    p = np.zeros((len(alice_settings), len(bob_settings), na, nb))
    for x, ma in enumerate(alice_settings):
        for y, mb in enumerate(bob_settings):
            for a, pa in enumerate(ma.projectors):
                for b, pb in enumerate(mb.projectors):
                    p[x, y, a, b] = np.trace(np.kron(pa, pb) @ rho.entries).real
    p = np.clip(p, 0.0, 1.0)
    return CorrelationTable(tuple(alice_settings), tuple(bob_settings), p)


def tomographically_complete(alice_settings, bob_settings) -> bool:
    """Whether product effects of the settings span all two-qubit Hermitian operators."""
    effects = [np.kron(pa, pb).reshape(-1) for ma in alice_settings for mb in bob_settings
               for pa in ma.projectors for pb in mb.projectors]
    mat = np.array(effects)
    return bool(np.linalg.matrix_rank(np.vstack([mat.real, mat.imag]).T, tol=1e-9) == 16)


@dataclass(frozen=True)
class Evidence:
    kind: str  # "alice-marginal" | "bob-marginal" | "joint" | "trace-distance"
    setting: tuple  # setting names involved
    first: tuple  # distribution (or value) under the first order
    second: tuple
    difference: float


@dataclass(frozen=True)
class ViolationVerdict:
    level: Level
    evidence: Evidence | None = None
    relative_to_settings: bool = False
    notes: tuple = field(default=())

    def check(self, chi_a: DensityMatrix, chi_b: DensityMatrix, settings=None) -> bool:
        """Re-evaluate the evidence on the states it was derived from."""
        if self.evidence is None:
            return self.level is Level.NONE
        ev = self.evidence
        if ev.kind == "trace-distance":
            return abs(trace_distance(chi_a, chi_b) - ev.difference) < 1e-12
        alice, bob = settings or (PAULI_SETTINGS, PAULI_SETTINGS)
        ta, tb = correlation_table(chi_a, alice, bob), correlation_table(chi_b, alice, bob)
        da, db = _distribution(ta, ev), _distribution(tb, ev)
        return bool(np.max(np.abs(da - db)) > DIFFER_TOL and np.allclose(da, ev.first) and np.allclose(db, ev.second))


def _index(settings, name):
    return [m.name for m in settings].index(name)


def _distribution(table: CorrelationTable, ev: Evidence) -> np.ndarray:
    if ev.kind == "alice-marginal":
        return table.alice_marginal(_index(table.alice_settings, ev.setting[0]))
    if ev.kind == "bob-marginal":
        return table.bob_marginal(_index(table.bob_settings, ev.setting[0]))
    x = _index(table.alice_settings, ev.setting[0])
    y = _index(table.bob_settings, ev.setting[1])
    return table.probs[x, y].reshape(-1)


def _evidence(kind, setting, da, db) -> Evidence:
    return Evidence(kind, setting, tuple(map(float, da)), tuple(map(float, db)), float(np.max(np.abs(da - db))))


def classify(
    chi_a: DensityMatrix,
    chi_b: DensityMatrix,
    alice_settings: Sequence[ProjectiveMeasurement] = PAULI_SETTINGS,
    bob_settings: Sequence[ProjectiveMeasurement] = PAULI_SETTINGS,
    tol: float = DIFFER_TOL,
) -> ViolationVerdict:
    """Strongest level at which the two time-order outcomes can be told apart."""
    relative = not tomographically_complete(alice_settings, bob_settings)
    ta = correlation_table(chi_a, alice_settings, bob_settings)
    tb = correlation_table(chi_b, alice_settings, bob_settings)
    best = None
    for x, m in enumerate(alice_settings):
        da, db = ta.alice_marginal(x), tb.alice_marginal(x)
        ev = _evidence("alice-marginal", (m.name,), da, db)
        if ev.difference > tol and (best is None or ev.difference > best.difference):
            best = ev
    for y, m in enumerate(bob_settings):
        da, db = ta.bob_marginal(y), tb.bob_marginal(y)
        ev = _evidence("bob-marginal", (m.name,), da, db)
        if ev.difference > tol and (best is None or ev.difference > best.difference):
            best = ev
    if best is not None:
        return ViolationVerdict(Level.STRONG, best, relative)
    for x, ma in enumerate(alice_settings):
        for y, mb in enumerate(bob_settings):
            ev = _evidence("joint", (ma.name, mb.name), ta.probs[x, y].reshape(-1), tb.probs[x, y].reshape(-1))
            if ev.difference > tol and (best is None or ev.difference > best.difference):
                best = ev
    if best is not None:
        return ViolationVerdict(Level.INTERMEDIATE, best, relative)
    dist = trace_distance(chi_a, chi_b)
    if dist > tol:
        notes = () if relative else ("product statistics complete yet states differ: not tomographically local",)
        return ViolationVerdict(Level.WEAK, Evidence("trace-distance", (), (), (), dist), relative, notes)
    return ViolationVerdict(Level.NONE, None, relative)


def signaling_success_probability(verdict: ViolationVerdict) -> float:
    """Best one-shot probability of guessing the time order from the witness marginal.

    Equal priors, optimal (likelihood-ratio) guess: ``½ + ½ TV(p, q)``.
    """
    if verdict.level is not Level.STRONG:
        return 0.5
    p, q = np.array(verdict.evidence.first), np.array(verdict.evidence.second)
    return float(0.5 + 0.25 * np.sum(np.abs(p - q)))


def _pauli_index(settings, name):
    names = [m.name for m in settings]
    if name not in names:
        raise ValueError(f"table lacks the Pauli {name} setting")
    idx = names.index(name)
    if any(np.max(np.abs(p - q)) > 1e-12 for p, q in zip(settings[idx].projectors, PAULI_MEASUREMENTS[name].projectors)):
        raise ValueError(f"setting {name!r} is not the Pauli {name} measurement")
    return idx


def reconstruct_state(table: CorrelationTable) -> DensityMatrix:
    """Two-qubit state from full Pauli product statistics.

    ``ρ = ¼ Σ_ij T_ij σ_i ⊗ σ_j`` with ``σ_0 = I``; local Bloch components come
    from the marginals, correlators from the joint tables.
    """
    paulis = [I2] + [PAULI_MEASUREMENTS[k].observable() for k in "xyz"]
    ia = [_pauli_index(table.alice_settings, k) for k in "xyz"]
    ib = [_pauli_index(table.bob_settings, k) for k in "xyz"]
    s = np.array([1.0, -1.0])
    coeff = np.zeros((4, 4))
    coeff[0, 0] = 1.0
    for i, x in enumerate(ia, start=1):
        coeff[i, 0] = float(s @ table.alice_marginal(x))
    for j, y in enumerate(ib, start=1):
        coeff[0, j] = float(s @ table.bob_marginal(y))
    for i, x in enumerate(ia, start=1):
        for j, y in enumerate(ib, start=1):
            coeff[i, j] = table.correlator(x, y)
    rho = sum(coeff[i, j] * np.kron(paulis[i], paulis[j]) for i in range(4) for j in range(4)) / 4
    lo = np.linalg.eigvalsh(rho).min()
    if lo < RECONSTRUCT_EIG_FLOOR:
        raise NonQuantumDataError(f"reconstruction has negative eigenvalue {lo:.6e}")
    try:
        return DensityMatrix(rho, tol_eig=RECONSTRUCT_EIG_FLOOR)
    except InvalidStateError as exc:
        raise NonQuantumDataError(str(exc)) from exc
