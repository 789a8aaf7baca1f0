"""Dense linear algebra for two- and three-party qubit/qutrit systems.

Subsystems are ordered (Alice, Bob[, Eve]) and composed big-endian, i.e. the
index of subsystem 0 varies slowest, exactly as ``np.kron`` composes them.

Tolerances are layered: construction validity 1e-10, eigendecomposition
reconstruction 1e-8, cross-checks between independent routes 1e-6.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericalIntegrityError

VALIDITY_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-8
HERMITIAN_INPUT_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)

_S = 1 / np.sqrt(2)
PHI_PLUS = np.array([_S, 0, 0, _S], dtype=complex)
PHI_MINUS = np.array([_S, 0, 0, -_S], dtype=complex)
PSI_PLUS = np.array([0, _S, _S, 0], dtype=complex)
PSI_MINUS = np.array([0, _S, -_S, 0], dtype=complex)
BELL_BASIS = {
    "phi_plus": PHI_PLUS,
    "phi_minus": PHI_MINUS,
    "psi_plus": PSI_PLUS,
    "psi_minus": PSI_MINUS,
}


def is_hermitian(m, tol=VALIDITY_TOL):
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T, rtol=0, atol=tol)


def is_positive_semidefinite(m, tol=VALIDITY_TOL):
    if not is_hermitian(m, tol):
        return False
    return bool(np.linalg.eigvalsh(np.asarray(m)).min() >= -tol)


def trace_one(m, tol=VALIDITY_TOL):
    return abs(np.trace(np.asarray(m)) - 1) <= tol


@dataclass(frozen=True)
class DensityMatrix:
    """Validated density operator with its subsystem dimensions.

    The stored matrix is a read-only copy; every constructor path goes
    through the Hermiticity / positivity / unit-trace checks.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        dims = tuple(int(d) for d in (self.dims if self.dims is not None else (m.shape[0],)))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise NumericalIntegrityError(f"density matrix must be square, got shape {m.shape}")
        if any(d < 1 for d in dims) or prod(dims) != m.shape[0]:
            raise DomainError("dims", dims, f"positive integers with product {m.shape[0]}")
        if not is_hermitian(m):
            raise NumericalIntegrityError("density matrix is not Hermitian within 1e-10")
        if not trace_one(m):
            raise NumericalIntegrityError(f"density matrix trace {np.trace(m).real:.3e} != 1")
        if np.linalg.eigvalsh(m).min() < -VALIDITY_TOL:
            raise NumericalIntegrityError("density matrix has a negative eigenvalue below -1e-10")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def from_ket(cls, psi, dims=None):
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), dims or (psi.size,))

    @classmethod
    def bell_diagonal(cls, weights):
        """Mixture ``sum_k w_k |B_k><B_k|`` over (Phi+, Phi-, Psi+, Psi-)."""
        w = np.asarray(weights, dtype=float)
        if w.shape != (4,):
            raise DomainError("weights", weights, "four Bell-basis weights")
        m = sum(wk * np.outer(b, b.conj()) for wk, b in zip(w, BELL_BASIS.values()))
        return cls(m, (2, 2))


def tensor(*ops):
    """Kronecker product, first factor slowest."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def embed(op, site, dims):
    """Lift a single-subsystem operator to the full space of ``dims``."""
    factors = [np.eye(d, dtype=complex) for d in dims]
    factors[site] = np.asarray(op, dtype=complex)
    return tensor(*factors)


def partial_trace(rho, keep):
    """Reduce ``rho`` to the subsystems listed in ``keep`` (order preserved)."""
    keep = sorted({keep} if isinstance(keep, int) else set(keep))
    n = len(rho.dims)
    if not keep or any(k < 0 or k >= n for k in keep):
        raise DomainError("keep", keep, f"nonempty subset of range({n})")
    t = rho.matrix.reshape(rho.dims * 2)
    # trace out from the highest index down so remaining axis numbers stay valid
    current = n
    for k in reversed(range(n)):
        if k in keep:
            continue
        t = np.trace(t, axis1=k, axis2=k + current)
        current -= 1
    kept_dims = tuple(rho.dims[k] for k in keep)
    d = prod(kept_dims)
    return DensityMatrix(t.reshape(d, d), kept_dims)


def eigensystem_hermitian(m):
    """Eigenvalues (descending) and matching eigenvector columns of a Hermitian matrix."""
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m, HERMITIAN_INPUT_TOL):
        raise DomainError("m", "non-Hermitian matrix", "Hermitian within 1e-9")
    vals, vecs = np.linalg.eigh(m)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    err = np.linalg.norm(m - (vecs * vals) @ vecs.conj().T)
    if err > RECONSTRUCTION_TOL:
        raise NumericalIntegrityError(f"eigendecomposition reconstruction error {err:.2e}")
    return vals, vecs


def shannon_entropy(probs):
    """Shannon entropy in bits with 0 log 0 = 0."""
    p = np.asarray(probs, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def clamped_spectrum(rho):
    """Eigenvalues of ``rho`` clipped into [0, 1].

    Roundoff down to -1e-10 is clipped; anything more negative is a bug
    upstream and raises.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    vals = np.linalg.eigvalsh(m)
    if vals.min() < -VALIDITY_TOL:
        raise NumericalIntegrityError(f"eigenvalue {vals.min():.3e} below -1e-10")
    return np.clip(vals, 0.0, 1.0)


def von_neumann_entropy(rho):
    return shannon_entropy(clamped_spectrum(rho))


@dataclass(frozen=True)
class PureState:
    vector: np.ndarray
    dims: tuple[int, ...]

    def density_matrix(self):
        return DensityMatrix.from_ket(self.vector, self.dims)


def purify(rho, rank_tol=1e-12):
    """Spectral purification ``sum_i sqrt(l_i) |v_i> (x) |i>``.

    The ancilla is appended as the last subsystem and has dimension equal to
    the rank of ``rho`` (eigenvalues at or below ``rank_tol`` are dropped).
    """
    vals, vecs = eigensystem_hermitian(rho.matrix)
    support = vals > rank_tol
    vals, vecs = vals[support], vecs[:, support]
    r = vals.size
    psi = np.zeros(rho.dim * r, dtype=complex)
    for i in range(r):
        anc = np.zeros(r)
        anc[i] = 1.0
        psi += np.sqrt(vals[i]) * np.kron(vecs[:, i], anc)
    psi /= np.linalg.norm(psi)
    return PureState(psi, tuple(rho.dims) + (r,))
