"""Dense symmetric-matrix primitives used by the Fisher and dimension code.

Only spectra matter downstream: ``det(I + c F^{1/2})`` is evaluated from the
eigenvalues of ``F`` and the square root is never formed explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimError, InvalidMatrix, NotPSD

__all__ = [
    "Spectrum",
    "as_sym",
    "jacobi_eigen",
    "sym_eigen",
    "psd_clamp",
    "logdet_one_plus_scaled_sqrt",
    "fisher_norm",
]

# Above this size the cyclic Jacobi sweep is replaced by LAPACK's syevd.
JACOBI_MAX_DIM = 32


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues, optionally with the orthonormal eigenbasis."""

    eigenvalues: np.ndarray
    basis: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1]) if self.dim else 0.0


def as_sym(m) -> np.ndarray:
    """Return ``(M + M^T) / 2`` as a float64 array, validating shape and finiteness."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix has non-finite entries")
    return 0.5 * (a + a.T)


def jacobi_eigen(m, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Sweeps over all (p, q) pairs in row order, annihilating ``a[p, q]`` with a
    plane rotation, until the off-diagonal Frobenius norm falls below
    ``tol * ||M||_F``.

    Returns
    -------
    (eigenvalues, basis) with eigenvalues ascending and ``basis`` orthonormal.
    """
    a = as_sym(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        w = np.diag(a).copy()
        order = np.argsort(w, kind="stable")
        return w[order], v[:, order]
    target = tol * scale
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off < target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sym_eigen(m, keep_basis=False, method="auto") -> Spectrum:
    """Eigen-decomposition of a symmetric matrix.

    ``method`` is ``"jacobi"``, ``"lapack"`` or ``"auto"`` (Jacobi up to
    ``JACOBI_MAX_DIM``, LAPACK beyond).  Both paths are deterministic.
    """
    a = as_sym(m)
    n = a.shape[0]
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        w, v = jacobi_eigen(a)
    elif method == "lapack":
        if keep_basis:
            w, v = np.linalg.eigh(a)
        else:
            w, v = np.linalg.eigvalsh(a), None
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    return Spectrum(np.asarray(w, dtype=np.float64), v if keep_basis else None)


def psd_clamp(s: Spectrum, rel_tol=1e-10) -> Spectrum:
    """Zero out small negative eigenvalues; reject large ones.

    Eigenvalues in ``[-rel_tol * lam_max, 0)`` are set to 0.  Anything more
    negative means the matrix was not PSD to begin with and raises
    :class:`NotPSD`.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    w = np.asarray(s.eigenvalues, dtype=np.float64)
    if w.size == 0:
        return s
    lam_max = max(float(np.max(w)), 0.0)
    floor = -rel_tol * lam_max
    if np.any(w < floor):
        raise NotPSD(f"eigenvalue {float(np.min(w)):.3e} below tolerance {floor:.3e}")
    return Spectrum(np.where(w < 0.0, 0.0, w), s.basis)


def logdet_one_plus_scaled_sqrt(s: Spectrum | np.ndarray, c: float) -> float:
    """``log det(I + c F^{1/2}) = sum_i log1p(c * sqrt(lam_i))``."""
    w = s.eigenvalues if isinstance(s, Spectrum) else np.asarray(s, dtype=np.float64)
    if c < 0:
        raise ValueError("scale c must be non-negative")
    if c == 0.0 or w.size == 0:
        return 0.0
    return float(np.sum(np.log1p(c * np.sqrt(w))))


def fisher_norm(m, v) -> float:
    """Pointed Fisher norm ``sqrt(v^T M v)``."""
    a = np.asarray(m, dtype=np.float64)
    x = np.asarray(v, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or x.shape != (a.shape[0],):
        raise DimError(f"matrix {a.shape} and vector {x.shape} do not match")
    q = float(x @ a @ x)
    # round-off on a PSD form can dip just below zero
    return float(np.sqrt(max(q, 0.0)))
