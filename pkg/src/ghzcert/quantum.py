"""Dense complex-matrix layer for few-qubit states and observables.

Everything here is a plain ``numpy.ndarray`` plus validation helpers; the
dimensions in play are 2, 4, 8 and 16, so no sparsity or cleverness is
needed. All functions are pure.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-10
IMAG_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
for _m in (I2, X, Y, Z):
    _m.setflags(write=False)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the first factor as the most significant subsystem."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"kron expects square matrices, got shape {a.shape}")
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"kron expects square matrices, got shape {b.shape}")
    return np.kron(a, b)


def kron_all(matrices) -> np.ndarray:
    """Left-to-right Kronecker product of a sequence (party 1 leftmost)."""
    mats = list(matrices)
    if not mats:
        raise ValueError("kron_all needs at least one matrix")
    return reduce(kron, mats)


def is_hermitian(m: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(
        np.max(np.abs(m - m.conj().T)) <= tol
    )


def hermitian_eigenvalues(h: np.ndarray, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix.

    Rejects inputs whose anti-Hermitian part exceeds ``tol``; the matrix is
    symmetrized before solving so accumulated round-off from channel
    compositions cannot leak into the eigensolver.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, tol):
        raise ValueError("matrix is not Hermitian within tolerance")
    return np.linalg.eigvalsh((h + h.conj().T) / 2.0)


def min_eigenvalue(h: np.ndarray, tol: float = HERMITICITY_TOL) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(hermitian_eigenvalues(h, tol)[0])


def ghz_vector(n_parties: int = 4) -> np.ndarray:
    """State vector (|0…0⟩ + |1…1⟩)/√2 on ``n_parties`` qubits."""
    if n_parties < 2:
        raise ValueError(f"GHZ state needs at least 2 parties, got {n_parties}")
    dim = 2**n_parties
    v = np.zeros(dim, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return v


def ghz_state(n_parties: int = 4) -> np.ndarray:
    """Density matrix of the pure ``n_parties``-qubit GHZ state."""
    v = ghz_vector(n_parties)
    return np.outer(v, v.conj())


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def noisy_ghz(alpha: float, n_parties: int = 4) -> np.ndarray:
    """Convex mixture (1−α)·GHZ + α·𝟙/2^n of the GHZ state with white noise."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"noise fraction must be in [0, 1], got {alpha}")
    dim = 2**n_parties
    return (1.0 - alpha) * ghz_state(n_parties) + alpha * maximally_mixed(dim)


def expectation(rho: np.ndarray, obs: np.ndarray) -> float:
    """Tr(ρ·O) as a real number; trips if the imaginary part is not negligible."""
    rho = np.asarray(rho, dtype=complex)
    obs = np.asarray(obs, dtype=complex)
    if rho.shape != obs.shape:
        raise ValueError(f"dimension mismatch: state {rho.shape} vs observable {obs.shape}")
    value = np.trace(rho @ obs)
    if abs(value.imag) > IMAG_TOL:
        raise ValueError(f"expectation value has imaginary part {value.imag:g}")
    return float(value.real)


def fidelity(rho: np.ndarray, target_vector: np.ndarray) -> float:
    """⟨ψ|ρ|ψ⟩ for a pure target |ψ⟩."""
    v = np.asarray(target_vector, dtype=complex)
    value = v.conj() @ np.asarray(rho, dtype=complex) @ v
    return float(value.real)


def check_density_matrix(
    rho: np.ndarray,
    trace_tol: float = TRACE_TOL,
    eig_floor: float = EIGENVALUE_FLOOR,
) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, positive semidefinite.

    Returns the input unchanged so the check composes inline.
    """
    rho = np.asarray(rho, dtype=complex)
    if not is_hermitian(rho):
        raise ValueError("density matrix is not Hermitian within tolerance")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr!r} differs from 1")
    smallest = min_eigenvalue(rho)
    if smallest < eig_floor:
        raise ValueError(f"density matrix has negative eigenvalue {smallest:g}")
    return rho


def is_dichotomic(obs: np.ndarray, tol: float = 1e-9) -> bool:
    """True when every eigenvalue of the observable is ±1 within ``tol``."""
    try:
        eigs = hermitian_eigenvalues(obs, tol=max(tol, HERMITICITY_TOL))
    except ValueError:
        return False
    return bool(np.max(np.abs(np.abs(eigs) - 1.0)) <= tol)
