"""Dense one- and two-qubit state algebra.

Basis ordering is fixed throughout the package: ``|00>, |01>, |10>, |11>``
with Alice as the left tensor factor and Bob as the right one.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIG_FLOOR = -1e-10
PROJECTOR_TOL = 1e-12


class InvalidStateError(ValueError):
    """Raised when a matrix or vector fails state validation."""


class Party(str, enum.Enum):
    ALICE = "alice"
    BOB = "bob"

    @classmethod
    def parse(cls, value: "str | Party") -> "Party":
        if isinstance(value, Party):
            return value
        key = str(value).strip().lower()
        aliases = {"a": cls.ALICE, "alice": cls.ALICE, "b": cls.BOB, "bob": cls.BOB}
        if key not in aliases:
            raise ValueError(f"unknown party {value!r}")
        return aliases[key]

    @property
    def other(self) -> "Party":
        return Party.BOB if self is Party.ALICE else Party.ALICE


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


def fix_global_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate ``vec`` so its first nonzero amplitude is real and nonnegative."""
    vec = np.asarray(vec, dtype=complex)
    for amp in vec:
        if abs(amp) > 1e-12:
            return vec * (abs(amp) / amp)
    return vec


@dataclass(frozen=True, eq=False)
class Ket:
    """Normalized pure state of dimension 2 or 4."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size not in (2, 4):
            raise InvalidStateError(f"ket must have 2 or 4 amplitudes, got {amps.size}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidStateError(f"ket norm {norm!r} differs from 1")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def normalized(cls, amplitudes: Sequence[complex]) -> "Ket":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(amps / np.linalg.norm(amps))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def canonical(self) -> "Ket":
        return Ket(fix_global_phase(self.amplitudes))

    def dm(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def inner(self, other: "Ket") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __matmul__(self, other: "Ket") -> "Ket":
        """Tensor product ``self (Alice) ⊗ other (Bob)``."""
        return Ket(np.kron(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Unit-trace positive Hermitian operator on one qubit or on qubit⊗qubit.

    Construction symmetrizes as ``(A + A†)/2`` after the Hermiticity check;
    eigenvalues are never clipped.
    """

    entries: np.ndarray
    tol_eig: float = field(default=EIG_FLOOR, compare=False, repr=False)

    def __post_init__(self):
        mat = np.asarray(self.entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] not in (2, 4):
            raise InvalidStateError(f"density matrix must be 2x2 or 4x4, got shape {mat.shape}")
        herm_err = np.max(np.abs(mat - mat.conj().T))
        if herm_err > HERMITIAN_TOL:
            raise InvalidStateError(f"matrix is not Hermitian (max |A - A†| = {herm_err:.3e})")
        mat = (mat + mat.conj().T) / 2
        tr = np.trace(mat).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace {tr!r} differs from 1")
        lo = np.linalg.eigvalsh(mat).min()
        if lo < self.tol_eig:
            raise InvalidStateError(f"matrix has negative eigenvalue {lo:.6e}")
        object.__setattr__(self, "entries", _frozen(mat))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_joint(self) -> bool:
        return self.dim == 4

    def expect(self, op: np.ndarray) -> float:
        return float(np.trace(self.entries @ op).real)

    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True, eq=False)
class ProjectiveMeasurement:
    """Complete set of mutually orthogonal projectors on one qubit.

    ``kets`` is filled in for rank-1 measurements built from an eigenbasis;
    it pins the phase convention of each outcome ket.
    """

    projectors: tuple
    labels: tuple
    name: str = ""
    kets: tuple | None = None

    def __post_init__(self):
        projs = tuple(_frozen(p) for p in self.projectors)
        if len(projs) != len(self.labels):
            raise ValueError("one label per projector required")
        dim = projs[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for i, p in enumerate(projs):
            if p.shape != (dim, dim):
                raise ValueError("projectors must share one square shape")
            if np.max(np.abs(p - p.conj().T)) > PROJECTOR_TOL:
                raise ValueError(f"projector {self.labels[i]!r} is not Hermitian")
            if np.max(np.abs(p @ p - p)) > PROJECTOR_TOL:
                raise ValueError(f"projector {self.labels[i]!r} is not idempotent")
            for j in range(i):
                if np.max(np.abs(p @ projs[j])) > PROJECTOR_TOL:
                    raise ValueError(
                        f"projectors {self.labels[j]!r} and {self.labels[i]!r} are not orthogonal"
                    )
            total += p
        if np.max(np.abs(total - np.eye(dim))) > PROJECTOR_TOL:
            raise ValueError("projectors do not sum to identity")
        object.__setattr__(self, "projectors", projs)
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_kets(cls, kets: Sequence[Ket], labels: Sequence[str], name: str = "") -> "ProjectiveMeasurement":
        projs = [np.outer(k.amplitudes, k.amplitudes.conj()) for k in kets]
        return cls(tuple(projs), tuple(labels), name, tuple(kets))

    @classmethod
    def along(cls, direction: Sequence[float], name: str | None = None) -> "ProjectiveMeasurement":
        """Spin measurement along a Bloch direction; outcome ``+`` first."""
        n = np.asarray(direction, dtype=float)
        n = n / np.linalg.norm(n)
        theta = np.arccos(np.clip(n[2], -1.0, 1.0))
        phi = np.arctan2(n[1], n[0])
        up = Ket([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
        if name is None:
            name = "n(" + ",".join(f"{c:.6g}" for c in n) + ")"
        return cls.from_kets((up, orthogonal_pure(up)), ("+", "-"), name)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def is_rank_one(self) -> bool:
        return all(abs(np.trace(p).real - 1.0) < 1e-9 for p in self.projectors)

    def observable(self) -> np.ndarray:
        """``P_0 - P_1`` for a two-outcome measurement."""
        if len(self.projectors) != 2:
            raise ValueError("observable defined for two-outcome measurements only")
        return self.projectors[0] - self.projectors[1]


class Branch(NamedTuple):
    probability: float
    label: str
    state: DensityMatrix


# --- constants ---------------------------------------------------------------

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}

_S = 1 / np.sqrt(2)
KET_0 = Ket([1, 0])
KET_1 = Ket([0, 1])
KET_X = Ket([_S, _S])
KET_XBAR = Ket([_S, -_S])
KET_Y = Ket([_S, 1j * _S])
KET_YBAR = Ket([_S, -1j * _S])

PSI_MINUS = Ket([0, _S, -_S, 0])
PSI_PLUS = Ket([0, _S, _S, 0])
PHI_PLUS = Ket([_S, 0, 0, _S])
PHI_MINUS = Ket([_S, 0, 0, -_S])
BELL_STATES = {"psi-minus": PSI_MINUS, "psi-plus": PSI_PLUS, "phi-plus": PHI_PLUS, "phi-minus": PHI_MINUS}

SIGMA_Z = ProjectiveMeasurement.from_kets((KET_0, KET_1), ("0", "1"), "z")
SIGMA_X = ProjectiveMeasurement.from_kets((KET_X, KET_XBAR), ("x", "x̄"), "x")
SIGMA_Y = ProjectiveMeasurement.from_kets((KET_Y, KET_YBAR), ("y", "ȳ"), "y")
PAULI_MEASUREMENTS = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

MAXIMALLY_MIXED_1 = DensityMatrix(I2 / 2)
MAXIMALLY_MIXED_2 = DensityMatrix(np.eye(4) / 4)


# --- operations --------------------------------------------------------------

def as_matrix(state) -> np.ndarray:
    if isinstance(state, DensityMatrix):
        return state.entries
    if isinstance(state, Ket):
        return np.outer(state.amplitudes, state.amplitudes.conj())
    return np.asarray(state, dtype=complex)


def embed(op: np.ndarray, party: Party | str) -> np.ndarray:
    """Extend a single-qubit operator to the joint space by identity on the other party."""
    party = Party.parse(party)
    return np.kron(op, I2) if party is Party.ALICE else np.kron(I2, op)


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """Joint state ``a (Alice) ⊗ b (Bob)``."""
    if a.dim != 2 or b.dim != 2:
        raise InvalidStateError(f"tensor expects two single-qubit states, got dims {a.dim} and {b.dim}")
    return DensityMatrix(np.kron(a.entries, b.entries))


def partial_trace(rho: DensityMatrix, keep: Party | str) -> DensityMatrix:
    """Reduced state of the party in ``keep``."""
    if rho.dim != 4:
        raise InvalidStateError("partial_trace expects a two-qubit state")
    t = rho.entries.reshape(2, 2, 2, 2)
    if Party.parse(keep) is Party.ALICE:
        red = np.einsum("ijkj->ik", t)
    else:
        red = np.einsum("ijil->jl", t)
    return DensityMatrix(red)


def measure_update(rho: DensityMatrix, m: ProjectiveMeasurement, party: Party | str = Party.ALICE):
    """Projection-postulate update of ``rho`` when ``party`` measures ``m``.

    Returns ``(ensemble, averaged)``: the outcome-conditioned normalized
    post-states with their Born probabilities (zero-probability outcomes
    dropped), and the unread state ``Σ_i P_i ρ P_i``.
    """
    ensemble = []
    averaged = np.zeros_like(rho.entries)
    for proj, label in zip(m.projectors, m.labels):
        op = proj if rho.dim == 2 else embed(proj, party)
        unnorm = op @ rho.entries @ op
        averaged += unnorm
        p = float(np.trace(unnorm).real)
        if p > 1e-14:
            ensemble.append(Branch(p, label, DensityMatrix(unnorm / p)))
    return tuple(ensemble), DensityMatrix(averaged)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(a) b sqrt(a)))^2``."""
    if a.dim != b.dim:
        raise InvalidStateError("fidelity of states with different dimensions")
    sa = _psd_sqrt(a.entries)
    inner = sa @ b.entries @ sa
    val = np.sum(np.sqrt(np.clip(np.linalg.eigvalsh((inner + inner.conj().T) / 2), 0, None))) ** 2
    return float(min(max(val, 0.0), 1.0))


def trace_distance(a, b) -> float:
    """``½‖a − b‖₁``; accepts states or raw Hermitian arrays."""
    diff = as_matrix(a) - as_matrix(b)
    if diff.shape[0] != diff.shape[1]:
        raise InvalidStateError("trace distance of non-square operands")
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


def orthogonal_pure(psi: Ket) -> Ket:
    """The qubit ket orthogonal to ``psi`` (Bloch vector negated), canonical phase."""
    if psi.dim != 2:
        raise InvalidStateError("orthogonal_pure expects a single-qubit ket")
    a, b = psi.amplitudes
    return Ket(fix_global_phase(np.array([-np.conj(b), np.conj(a)])))


def bloch_vector(rho: DensityMatrix | np.ndarray) -> np.ndarray:
    mat = as_matrix(rho)
    return np.array([np.trace(mat @ PAULIS[k]).real for k in "xyz"])


def from_bloch(r: Sequence[float]) -> DensityMatrix:
    r = np.asarray(r, dtype=float)
    return DensityMatrix((I2 + r[0] * PAULI_X + r[1] * PAULI_Y + r[2] * PAULI_Z) / 2)


def ket_from_bloch(r: Sequence[float]) -> Ket:
    r = np.asarray(r, dtype=float)
    r = r / np.linalg.norm(r)
    theta = np.arccos(np.clip(r[2], -1.0, 1.0))
    phi = np.arctan2(r[1], r[0])
    return Ket([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def product_factor(rho: DensityMatrix, party: Party | str, tol: float = 1e-9) -> Ket | None:
    """If ``rho = σ ⊗ |ψ><ψ|`` with a pure factor on ``party``, return that ket."""
    party = Party.parse(party)
    red = partial_trace(rho, party)
    w, v = np.linalg.eigh(red.entries)
    if w[-1] < 1 - tol:
        return None
    ket = Ket.normalized(v[:, -1]).canonical()
    return ket


# --- random states -----------------------------------------------------------

def random_ket(rng: np.random.Generator, dim: int = 2) -> Ket:
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return Ket.normalized(z)


def random_density_matrix(rng: np.random.Generator, dim: int = 4, rank: int | None = None) -> DensityMatrix:
    """Ginibre-distributed mixed state (Hilbert-Schmidt measure for full rank)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    mat = g @ g.conj().T
    return DensityMatrix(mat / np.trace(mat).real)


def random_unitary(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
