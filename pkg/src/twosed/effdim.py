"""Two-scale effective dimension and its layerwise lower bound.

Everything is evaluated from per-(theta, block) spectra of the normalized
Fisher blocks.  Expectations over theta are empirical means over the sampled
points and are computed as ``logsumexp - log K`` of per-sample
log-determinants, so nothing overflows at small covering radius.

For a block-diagonal Fisher matrix ``det(I + c F^{1/2})`` factors into the
product of block determinants, so the per-sample total log-determinant is the
sum of block log-determinants.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError

__all__ = [
    "SpectrumEnsemble",
    "EffDimCurve",
    "two_sed",
    "lower_two_sed",
    "sweep",
    "rank_estimate",
    "log_grid",
]


@dataclass
class SpectrumEnsemble:
    """Eigenvalues of every normalized block ``F_j`` at every sampled theta.

    ``spectra[k][j]`` is a 1-D array of clamped (non-negative) eigenvalues.
    """

    spectra: list
    d: int
    block_dims: tuple

    def __post_init__(self):
        self.block_dims = tuple(int(x) for x in self.block_dims)
        if sum(self.block_dims) != self.d:
            raise ValueError(f"block dims {self.block_dims} do not sum to d={self.d}")
        if not self.spectra:
            raise ValueError("empty ensemble")
        for row in self.spectra:
            if len(row) != len(self.block_dims):
                raise ValueError("every theta sample needs one spectrum per block")
            for w in row:
                if np.any(np.asarray(w) < 0):
                    raise ValueError("spectra must be clamped to be non-negative")

    @property
    def K(self) -> int:
        return len(self.spectra)

    @property
    def L(self) -> int:
        return len(self.block_dims)

    @classmethod
    def constant(cls, eigenvalues, K=1, block_dims=None):
        """Ensemble in which every theta carries the same spectrum."""
        w = np.asarray(eigenvalues, dtype=np.float64)
        if block_dims is None:
            block_dims = (len(w),)
        cuts = np.cumsum((0,) + tuple(block_dims))
        row = [w[a:b] for a, b in zip(cuts[:-1], cuts[1:])]
        return cls([list(row) for _ in range(K)], int(len(w)), tuple(block_dims))

    def scaled(self, c):
        return SpectrumEnsemble([[c * w for w in row] for row in self.spectra], self.d, self.block_dims)

    def logdets(self, c) -> np.ndarray:
        """Matrix ``[k, j] = sum_i log(1 + c sqrt(lam_i))`` for block ``j`` at theta ``k``."""
        out = np.empty((self.K, self.L))
        for k, row in enumerate(self.spectra):
            for j, w in enumerate(row):
                out[k, j] = np.sum(np.log1p(c * np.sqrt(w))) if c > 0 else 0.0
        return out

    def max_eigenvalue(self) -> float:
        return max((float(np.max(w)) if len(w) else 0.0) for row in self.spectra for w in row)


def _check_scales(epsilon, zeta):
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0.0 <= zeta < 1.0:
        raise DomainError(f"zeta must lie in [0, 1), got {zeta}")


def _scale(epsilon, zeta):
    """Determinant scale ``eps^(zeta-1)`` and denominator ``|log eps^(zeta-1)|``."""
    log_c = (zeta - 1.0) * np.log(epsilon)
    return float(np.exp(log_c)), abs(log_c)


def _logmeanexp(a):
    return float(logsumexp(a) - np.log(len(a)))


def _upper_from_logdets(ld, d, zeta, denom):
    total = ld.sum(axis=1)
    return zeta * d + (1.0 - zeta) * _logmeanexp(total) / denom


def _lower_from_logdets(ld, d, zeta, denom):
    coef = (1.0 - zeta) / denom
    K, L = ld.shape
    inc = np.empty(L)
    inc[0] = coef * _logmeanexp(ld[:, 0])
    prefix = ld[:, 0].copy()
    for m in range(1, L):
        # self-normalized weights  w_k  proportional to  prod_{j<m} det_j(theta_k)
        logw = prefix - logsumexp(prefix)
        inc[m] = coef * float(np.sum(np.exp(logw) * ld[:, m]))
        prefix += ld[:, m]
    return zeta * d + float(np.sum(inc)), inc


def two_sed(ens: SpectrumEnsemble, epsilon, zeta=0.0) -> float:
    """``zeta d + (1-zeta) log E[det(I + eps^(zeta-1) F^{1/2})] / |log eps^(zeta-1)|``."""
    _check_scales(epsilon, zeta)
    c, denom = _scale(epsilon, zeta)
    return _upper_from_logdets(ens.logdets(c), ens.d, zeta, denom)


def lower_two_sed(ens: SpectrumEnsemble, epsilon, zeta=0.0):
    """Layerwise lower bound and its per-block contributions.

    Returns ``(d_lower, inc)`` where ``inc[0] = d_lower^1 - zeta d`` and
    ``inc[m]`` (m >= 1) is the increment contributed by block ``m+1``: the
    weighted mean of its log-determinant, with weights proportional to the
    product of the earlier blocks' determinants at the same theta sample and
    normalized to sum to one.  ``zeta d + sum(inc) = d_lower``.
    """
    _check_scales(epsilon, zeta)
    c, denom = _scale(epsilon, zeta)
    return _lower_from_logdets(ens.logdets(c), ens.d, zeta, denom)


def _jackknife(values):
    k = len(values)
    if k < 2:
        return float("nan")
    mean = np.mean(values)
    return float(np.sqrt((k - 1) / k * np.sum((values - mean) ** 2)))


@dataclass
class EffDimCurve:
    epsilon: np.ndarray
    zeta: float
    d_zeta: np.ndarray
    d_lower: np.ndarray
    increments: np.ndarray  # (rows, L)
    se_upper: np.ndarray
    se_lower: np.ndarray

    def __len__(self):
        return len(self.epsilon)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        L = self.increments.shape[1]
        w.writerow(["epsilon", "zeta", "d_zeta", "d_lower"]
                   + [f"inc_{m + 1}" for m in range(L)] + ["se_upper", "se_lower"])
        for r in range(len(self)):
            vals = [self.epsilon[r], self.zeta, self.d_zeta[r], self.d_lower[r],
                    *self.increments[r], self.se_upper[r], self.se_lower[r]]
            w.writerow([f"{float(v):.17g}" for v in vals])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EffDimCurve":
        rows = list(csv.reader(io.StringIO(text)))
        head, body = rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
        n_inc = sum(h.startswith("inc_") for h in head)
        return cls(body[:, 0], float(body[0, 1]) if len(body) else 0.0, body[:, 2], body[:, 3],
                   body[:, 4: 4 + n_inc], body[:, 4 + n_inc], body[:, 5 + n_inc])


def sweep(ens: SpectrumEnsemble, eps_grid, zeta=0.0, jackknife=True) -> EffDimCurve:
    """Both measures over a grid of covering radii, sorted by decreasing epsilon.

    Standard errors are delete-one jackknife estimates over theta samples.
    """
    eps = np.array(sorted({float(e) for e in eps_grid}, reverse=True))
    for e in eps:
        _check_scales(e, zeta)
    n = len(eps)
    up, lo = np.empty(n), np.empty(n)
    inc = np.empty((n, ens.L))
    se_u, se_l = np.full(n, np.nan), np.full(n, np.nan)
    keep = [np.delete(np.arange(ens.K), k) for k in range(ens.K)]
    for r, e in enumerate(eps):
        c, denom = _scale(e, zeta)
        ld = ens.logdets(c)
        up[r] = _upper_from_logdets(ld, ens.d, zeta, denom)
        lo[r], inc[r] = _lower_from_logdets(ld, ens.d, zeta, denom)
        if jackknife and ens.K > 1:
            se_u[r] = _jackknife(np.array([_upper_from_logdets(ld[i], ens.d, zeta, denom) for i in keep]))
            se_l[r] = _jackknife(np.array([_lower_from_logdets(ld[i], ens.d, zeta, denom)[0] for i in keep]))
    return EffDimCurve(eps, float(zeta), up, lo, inc, se_u, se_l)


def rank_estimate(ens: SpectrumEnsemble, rel_threshold=1e-8) -> int:
    """Largest count, over theta samples, of eigenvalues above ``rel_threshold * lam_max``."""
    if not 0.0 < rel_threshold < 1.0:
        raise DomainError("rel_threshold must lie in (0, 1)")
    best = 0
    for row in ens.spectra:
        w = np.concatenate([np.asarray(x) for x in row]) if row else np.zeros(0)
        if w.size == 0:
            continue
        lam_max = float(np.max(w))
        if lam_max <= 0.0:
            continue
        best = max(best, int(np.sum(w > rel_threshold * lam_max)))
    return best


def log_grid(eps_min=1e-6, eps_max=1e-1, count=20):
    """Log-spaced covering radii, largest first."""
    if not 0 < eps_min <= eps_max < 1:
        raise DomainError("need 0 < eps_min <= eps_max < 1")
    return np.logspace(np.log10(eps_max), np.log10(eps_min), int(count))
