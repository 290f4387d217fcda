"""Qubit channels in Choi form.

The Choi matrix is ``J = Σ_ij |i><j| ⊗ Λ(|i><j|)`` with the input on the
left factor, so ``Λ(ρ) = Tr_in[(ρᵀ ⊗ I) J]`` and trace preservation reads
``Tr_out J = I``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qcore import I2, PAULI_X, PAULI_Y, PAULI_Z, DensityMatrix, InvalidStateError, _frozen

CHOI_TOL = 1e-10


def choi_partial_trace_out(j: np.ndarray) -> np.ndarray:
    return np.einsum("ijkj->ik", j.reshape(2, 2, 2, 2))


def choi_residuals(j: np.ndarray) -> tuple[float, float]:
    """``(positivity deficit, trace-preservation error)`` of a raw Choi array."""
    j = np.asarray(j, dtype=complex)
    psd = max(0.0, -float(np.linalg.eigvalsh((j + j.conj().T) / 2).min()))
    tp = float(np.max(np.abs(choi_partial_trace_out(j) - I2)))
    return psd, tp


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    """Completely positive trace-preserving qubit channel."""

    entries: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.entries, dtype=complex)
        if j.shape != (4, 4):
            raise InvalidStateError(f"Choi matrix must be 4x4, got {j.shape}")
        if np.max(np.abs(j - j.conj().T)) > CHOI_TOL:
            raise InvalidStateError("Choi matrix is not Hermitian")
        j = (j + j.conj().T) / 2
        psd, tp = choi_residuals(j)
        if psd > CHOI_TOL:
            raise InvalidStateError(f"Choi matrix not positive semidefinite (eigenvalue {-psd:.3e})")
        if tp > CHOI_TOL:
            raise InvalidStateError(f"channel not trace preserving (error {tp:.3e})")
        object.__setattr__(self, "entries", _frozen(j))

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray]) -> "ChoiMatrix":
        j = np.zeros((4, 4), dtype=complex)
        for k in kraus:
            k = np.asarray(k, dtype=complex)
            # Σ_i |i> ⊗ K|i>
            v = sum(np.kron(np.eye(2)[i], k[:, i]) for i in range(2))
            j += np.outer(v, v.conj())
        return cls(j)

    @classmethod
    def from_unitary(cls, u: np.ndarray) -> "ChoiMatrix":
        return cls.from_kraus([u])

    def apply(self, rho: np.ndarray | DensityMatrix) -> np.ndarray:
        rho = np.asarray(rho.entries if isinstance(rho, DensityMatrix) else rho, dtype=complex)
        j = self.entries.reshape(2, 2, 2, 2)
        # Λ(ρ)_{kl} = Σ_ij ρ_ij J_{(i,k),(j,l)}
        return np.einsum("ij,ikjl->kl", rho, j)

    def bloch_affine(self) -> tuple[np.ndarray, np.ndarray]:
        """``(M, t)`` with output Bloch vector ``M r + t`` for input ``r``."""
        paulis = (PAULI_X, PAULI_Y, PAULI_Z)
        t = np.array([np.trace(self.apply(I2 / 2) @ p).real for p in paulis])
        m = np.empty((3, 3))
        for col, q in enumerate(paulis):
            out = self.apply(q / 2)
            m[:, col] = [np.trace(out @ p).real for p in paulis]
        return m, t

    def residuals(self) -> tuple[float, float]:
        return choi_residuals(self.entries)


def identity_channel() -> ChoiMatrix:
    return ChoiMatrix.from_unitary(I2)


def depolarizing(p: float) -> ChoiMatrix:
    """``ρ ↦ (1-p) ρ + p I/2``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing probability must lie in [0, 1]")
    kraus = [np.sqrt(1 - 3 * p / 4) * I2] + [np.sqrt(p / 4) * s for s in (PAULI_X, PAULI_Y, PAULI_Z)]
    return ChoiMatrix.from_kraus(kraus)


def completely_depolarizing() -> ChoiMatrix:
    return depolarizing(1.0)


def pauli_average_flip() -> ChoiMatrix:
    """``ρ ↦ (σ_x ρ σ_x + σ_y ρ σ_y + σ_z ρ σ_z)/3``, shrinking Bloch vectors to ``-r/3``."""
    return ChoiMatrix.from_kraus([s / np.sqrt(3) for s in (PAULI_X, PAULI_Y, PAULI_Z)])


def mix(channels: Sequence[ChoiMatrix], weights: Sequence[float]) -> ChoiMatrix:
    return ChoiMatrix(sum(w * c.entries for c, w in zip(channels, weights)))


def random_channel(rng: np.random.Generator, kraus_rank: int = 4) -> ChoiMatrix:
    """Random CPTP map from a Haar-random Stinespring isometry."""
    dim = 2 * kraus_rank
    z = rng.normal(size=(dim, 2)) + 1j * rng.normal(size=(dim, 2))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    kraus = [q[2 * k:2 * k + 2, :] for k in range(kraus_rank)]
    return ChoiMatrix.from_kraus(kraus)
