"""Dense complex linear algebra for small multi-qubit operators.

Everything here works on plain ``numpy`` arrays.  Operators are dense,
row-major, and capped at dimension 256 (eight qubits); Hermitian inputs are
re-symmetrized on entry so round-off never drifts across iterations.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalFailureError, PositivityError, SizeLimitError

MAX_DIM = 256  # 2**8; collective operations cap at 8 qubits

# Eigenvalues in [-1e-8, 0) are round-off and get clipped to zero; anything
# below -1e-8 is a logic bug and raises.
_EIG_ERROR_FLOOR = -1e-8


def hermitianize(a: np.ndarray) -> np.ndarray:
    """Hermitian part (A + A^dagger) / 2."""
    return (a + a.conj().T) / 2


def hermitian(a, *, tol: float = 1e-8) -> np.ndarray:
    """Validate and symmetrize a Hermitian operator.

    Accepts anything array-like, checks it is square, finite, and Hermitian
    within ``tol``, and returns the exactly symmetrized copy.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("matrix has non-finite entries")
    residual = np.abs(a - a.conj().T).max()
    if residual > tol:
        raise ValueError(f"matrix is not Hermitian: residual {residual:.3e} > {tol:.1e}")
    return hermitianize(a)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the 8-qubit size guard."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.size == 0 or b.size == 0:
        raise ValueError("kron of an empty matrix")
    rows = a.shape[0] * b.shape[0]
    cols = (a.shape[1] if a.ndim > 1 else 1) * (b.shape[1] if b.ndim > 1 else 1)
    if rows > MAX_DIM or cols > MAX_DIM:
        raise SizeLimitError(f"kron result {rows}x{cols} exceeds {MAX_DIM}x{MAX_DIM}")
    return np.kron(a, b)


def eigh(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvector columns of a Hermitian matrix."""
    h = hermitian(h)
    try:
        return np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigendecomposition failed: {exc}") from exc


def psd_sqrt_and_invsqrt(
    h: np.ndarray, null_threshold: float = 1e-12
) -> tuple[np.ndarray, np.ndarray]:
    """Square root and pseudo-inverted inverse square root of a PSD operator.

    Eigenvalues at or below ``null_threshold`` are treated as the null space:
    they contribute zero to the inverse square root.  Eigenvalues below the
    hard floor -1e-8 raise ``PositivityError``.
    """
    w, v = eigh(h)
    if w.min() < _EIG_ERROR_FLOOR:
        raise PositivityError(f"operator has eigenvalue {w.min():.3e} below {_EIG_ERROR_FLOOR:.1e}")
    w = np.clip(w, 0.0, None)
    sqrt_w = np.sqrt(w)
    inv_w = np.where(w > null_threshold, 1.0 / np.maximum(sqrt_w, 1e-300), 0.0)
    root = hermitianize((v * sqrt_w) @ v.conj().T)
    inv_root = hermitianize((v * inv_w) @ v.conj().T)
    return root, inv_root


def trace_product(a: np.ndarray, b: np.ndarray) -> float:
    """Re tr(AB) for equal-dimension operators; asserts the trace is real."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    t = np.einsum("ij,ji->", a, b)
    if abs(t.imag) > 1e-10:
        raise NumericalFailureError(f"trace has imaginary residual {t.imag:.3e}")
    return float(t.real)


def projector(psi: np.ndarray) -> np.ndarray:
    """Rank-one projector |psi><psi|."""
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())


def normalize_state(psi: np.ndarray) -> np.ndarray:
    """Scale a state vector to unit norm."""
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if norm < 1e-300:
        raise ValueError("cannot normalize a zero vector")
    return psi / norm
