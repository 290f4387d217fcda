"""Linear-programming oracle over a discretized phase circle.

Independent of the closed-form block test in :mod:`acflip.theorem1`: a
family's hull is replaced by the hull of finitely many points, and membership
or a common point is decided by ``scipy.optimize.linprog``.

The vertices sit on the circumscribed polygon of the coherence disk (radius
scaled by ``1/cos(π/n)``), so the polygon hull contains the true hull. For
positive semidefinite inputs the two agree exactly; an empty common hull of
the outer polygons proves the true hulls have no common point.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .theorem1 import PhaseFamily

GRID = 720
LP_TOL = 1e-8
_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}

_IU = np.triu_indices(4, 1)


def real_coords(m: np.ndarray) -> np.ndarray:
    """Sixteen real coordinates of a Hermitian 4x4 matrix."""
    m = np.asarray(m, dtype=complex)
    return np.concatenate([np.diag(m).real, m[_IU].real, m[_IU].imag])


def vertex_matrices(fam: PhaseFamily, n: int = GRID, outer: bool = True) -> np.ndarray:
    """Matrices ``w0|a><a| + w1|b><b| + R c(φ_k)|a><b| + h.c.`` for ``φ_k = 2πk/n``."""
    a, b = (k.amplitudes for k in fam.basis_pair)
    w0, w1 = fam.weights
    scale = 1 / np.cos(np.pi / n) if outer else 1.0
    diag = w0 * np.outer(a, a.conj()) + w1 * np.outer(b, b.conj())
    ab = np.outer(a, b.conj())
    phases = 2 * np.pi * np.arange(n) / n
    coh = scale * np.sqrt(w0 * w1) * np.exp(-1j * phases)
    return diag[None] + coh[:, None, None] * ab[None] + np.conj(coh)[:, None, None] * ab.conj().T[None]


def _vertex_columns(fam: PhaseFamily, n: int) -> np.ndarray:
    return np.stack([real_coords(v) for v in vertex_matrices(fam, n)], axis=1)


def lp_membership(chi, fam: PhaseFamily, n: int = GRID) -> tuple[bool, float]:
    """Minimal L1 distance from ``chi`` to the polygon hull; member iff ≤ ``LP_TOL``."""
    target = real_coords(getattr(chi, "entries", chi))
    cols = _vertex_columns(fam, n)
    d = cols.shape[0]
    # variables: weights (n), slack+ (d), slack- (d)
    a_eq = np.hstack([cols, np.eye(d), -np.eye(d)])
    a_eq = np.vstack([a_eq, np.concatenate([np.ones(n), np.zeros(2 * d)])])
    b_eq = np.concatenate([target, [1.0]])
    c = np.concatenate([np.zeros(n), np.ones(2 * d)])
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs", options=_HIGHS)
    if res.status != 0:
        raise RuntimeError(f"LP oracle failed: {res.message}")
    return bool(res.fun <= LP_TOL), float(res.fun)


def lp_common_point_gap(families: list[PhaseFamily], n: int = GRID) -> float:
    """Minimal L1 mismatch between points chosen from each family's polygon hull.

    Zero means a common point exists; a positive value certifies disjointness.
    """
    cols = [_vertex_columns(f, n) for f in families]
    d = cols[0].shape[0]
    k = len(families)
    nw = n * k
    n_pairs = k - 1
    n_var = nw + 2 * d * n_pairs
    rows, rhs = [], []
    for j in range(1, k):
        block = np.zeros((d, n_var))
        block[:, 0:n] = cols[0]
        block[:, j * n:(j + 1) * n] = -cols[j]
        off = nw + 2 * d * (j - 1)
        block[:, off:off + d] = np.eye(d)
        block[:, off + d:off + 2 * d] = -np.eye(d)
        rows.append(block)
        rhs.append(np.zeros(d))
    for j in range(k):
        row = np.zeros((1, n_var))
        row[0, j * n:(j + 1) * n] = 1.0
        rows.append(row)
        rhs.append([1.0])
    c = np.concatenate([np.zeros(nw), np.ones(2 * d * n_pairs)])
    res = linprog(c, A_eq=np.vstack(rows), b_eq=np.concatenate(rhs), bounds=(0, None),
                  method="highs", options=_HIGHS)
    if res.status != 0:
        raise RuntimeError(f"LP oracle failed: {res.message}")
    return float(max(res.fun, 0.0))


def lp_membership_batch(chis, fam: PhaseFamily, n: int = GRID, chunk: int = 100) -> list[tuple[bool, float]]:
    """:func:`lp_membership` for many inputs, solved as block-diagonal LPs.

    The blocks share no variables, so minimizing the summed objective
    minimizes every block's objective at once.
    """
    from scipy import sparse

    cols = sparse.csr_matrix(_vertex_columns(fam, n))
    d = cols.shape[0]
    eye = sparse.identity(d, format="csr")
    block = sparse.vstack([
        sparse.hstack([cols, eye, -eye]),
        sparse.hstack([sparse.csr_matrix(np.ones((1, n))), sparse.csr_matrix((1, 2 * d))]),
    ]).tocsr()
    cost = np.concatenate([np.zeros(n), np.ones(2 * d)])
    nv = n + 2 * d
    out = []
    chis = list(chis)
    for start in range(0, len(chis), chunk):
        part = chis[start:start + chunk]
        a_eq = sparse.block_diag([block] * len(part), format="csr")
        b_eq = np.concatenate([np.append(real_coords(getattr(c, "entries", c)), 1.0) for c in part])
        res = linprog(np.tile(cost, len(part)), A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                      method="highs", options=_HIGHS)
        if res.status != 0:
            raise RuntimeError(f"LP oracle failed: {res.message}")
        for i in range(len(part)):
            val = float(res.x[i * nv + n:(i + 1) * nv].sum())
            out.append((bool(val <= LP_TOL), val))
    return out
