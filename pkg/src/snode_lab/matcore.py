"""Dense complex-matrix kernel: Hermitian checks, Cholesky, square roots,
determinants, norms, block assembly.

All helpers operate on plain ``numpy`` arrays of complex dtype and never
mutate their inputs.  Sizes in this library stay below ~64, so everything
favours determinism and clarity over asymptotic speed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotHermitian, NotPositiveDefinite


def tolerance_scale() -> float:
    """Global tolerance multiplier, read from the SNODELAB_TOL env var (default 1)."""
    return float(os.environ.get("SNODELAB_TOL", "1"))


def as_matrix(M) -> np.ndarray:
    """Coerce to a 2-d complex array and reject non-finite entries."""
    out = np.asarray(M, dtype=complex)
    if out.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("matrix entries must be finite")
    return out


def default_tol(M) -> float:
    """Default Hermitian tolerance 1e-10 * (1 + max|entry|), times the global scale.

    Inputs in this library come from exact formulas, so deviations beyond
    this indicate bugs rather than conditioning.
    """
    M = np.asarray(M)
    peak = float(np.max(np.abs(M))) if M.size else 0.0
    return 1e-10 * (1.0 + peak) * tolerance_scale()


def hermitian_deviation(M) -> float:
    """max |M - M*| entrywise."""
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"square matrix required, got shape {M.shape}")
    return float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0


def assert_hermitian(M, tol: float | None = None) -> None:
    """Raise :class:`NotHermitian` unless max|M - M*| <= tol entrywise."""
    M = as_matrix(M)
    if tol is None:
        tol = default_tol(M)
    dev = hermitian_deviation(M)
    if dev > tol:
        raise NotHermitian(dev)


def hermitian_part(M) -> np.ndarray:
    M = as_matrix(M)
    return (M + M.conj().T) / 2.0


def frobenius(M) -> float:
    return float(np.linalg.norm(np.asarray(M, dtype=complex)))


def spectral_norm(M) -> float:
    return float(np.linalg.norm(np.asarray(M, dtype=complex), 2))


def min_eig_hermitian(M) -> float:
    """Smallest eigenvalue of a (numerically) Hermitian matrix."""
    return float(np.linalg.eigvalsh(hermitian_part(M))[0])


@dataclass(frozen=True)
class HermPD:
    """A Hermitian positive-definite matrix together with its Cholesky factor.

    ``factor`` is lower triangular with ``factor @ factor* = matrix``.
    """

    matrix: np.ndarray
    factor: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def det(self) -> float:
        # product of squared pivots; never cofactor expansion
        return float(np.prod(np.abs(np.diag(self.factor)) ** 2))

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.abs(np.diag(self.factor)))))

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=complex)
        y = np.linalg.solve(self.factor, rhs)
        return np.linalg.solve(self.factor.conj().T, y)

    def inv(self) -> np.ndarray:
        return self.solve(np.eye(self.n))


def cholesky_pd(M, tol: float | None = None) -> HermPD:
    """Factor a Hermitian positive-definite matrix.

    Raises :class:`NotHermitian` when M deviates from M* beyond ``tol`` and
    :class:`NotPositiveDefinite` when a pivot fails.
    """
    M = as_matrix(M)
    assert_hermitian(M, tol)
    H = hermitian_part(M)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc) or "cholesky pivot failed") from exc
    return HermPD(matrix=H, factor=L)


def sqrtm_hpd(M) -> np.ndarray:
    """Hermitian square root R > 0 with R @ R = M, for Hermitian M > 0.

    Accepts either a :class:`HermPD` or a plain Hermitian array.  Uses an
    eigendecomposition; deterministic at the sizes used here.
    """
    if isinstance(M, HermPD):
        M = M.matrix
    M = as_matrix(M)
    assert_hermitian(M)
    w, V = np.linalg.eigh(hermitian_part(M))
    if w[0] <= 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} is not positive")
    return (V * np.sqrt(w)) @ V.conj().T


def sqrtm_psd(M, tol: float | None = None) -> np.ndarray:
    """Hermitian square root of a positive SEMI-definite matrix.

    Eigenvalues in [-tol, 0) are clipped to zero; anything below -tol raises
    :class:`NotPositiveDefinite`.
    """
    if isinstance(M, HermPD):
        M = M.matrix
    M = as_matrix(M)
    if tol is None:
        tol = default_tol(M)
    assert_hermitian(M, tol)
    w, V = np.linalg.eigh(hermitian_part(M))
    if w.size and w[0] < -tol:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} below -tol")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T


def inv_hpd(M) -> np.ndarray:
    """Inverse of a Hermitian positive-definite matrix via its Cholesky factor."""
    pd = M if isinstance(M, HermPD) else cholesky_pd(M)
    out = pd.inv()
    return hermitian_part(out)


def block(rows) -> np.ndarray:
    """Assemble a matrix from a 2-d nested list of blocks (complex dtype)."""
    return np.block([[np.asarray(b, dtype=complex) for b in row] for row in rows])


def blocks2x2(M, p: int):
    """Split a 2p x 2p matrix into its four p x p blocks (11, 12, 21, 22)."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (2 * p, 2 * p):
        raise DimensionMismatch(f"expected shape {(2 * p, 2 * p)}, got {M.shape}")
    return M[:p, :p], M[:p, p:], M[p:, :p], M[p:, p:]


def exchange_J(p: int) -> np.ndarray:
    """The 2p x 2p block exchange [[0, I], [I, 0]]."""
    Ip = np.eye(p, dtype=complex)
    Z = np.zeros((p, p), dtype=complex)
    return block([[Z, Ip], [Ip, Z]])


def signature_j(p: int) -> np.ndarray:
    """The 2p x 2p signature diag(I, -I)."""
    Ip = np.eye(p, dtype=complex)
    return block([[Ip, np.zeros((p, p))], [np.zeros((p, p)), -Ip]])
