"""Executable checks of the theory on models small enough for brute force.

The toy models are Bernoulli classifiers on a finite input support with
``p_theta(y=1|x) = a + (1 - 2a) * sigmoid(gain * theta.x - offset)`` on
``Theta = [0, 1]^d``.  Their Fisher matrix is available in closed form, so
every quantity here is computed independently of the network machinery.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import expit, logsumexp

from .effdim import SpectrumEnsemble, lower_two_sed, rank_estimate, two_sed
from .errors import TooLarge
from .fisher import block_fim, empirical_fim, normalize_ensemble
from .netmodel import STREAM_DATA, parse_model_string, rng_for, sample_params

__all__ = [
    "ToyModel",
    "bundled_toys",
    "CheckReport",
    "toy_two_sed",
    "toy_fim_mc",
    "covering_count",
    "covering_slope_check",
    "generalization_gap",
    "generalization_gap_from_frequencies",
    "eps_n",
    "rate_shape_check",
    "upper_bound_check",
    "rank_limit_check",
    "jensen_check",
    "sigma_invariance_check",
    "run_suite",
    "SUITES",
]


@dataclass(frozen=True)
class ToyModel:
    name: str
    xs: np.ndarray          # (m, d) input support
    px: np.ndarray          # (m,) input probabilities
    theta_star: np.ndarray  # parameter of the data-generating conditional
    gain: float = 1.0
    offset: float = 0.0
    alpha: float = 0.05
    fixed_fim: np.ndarray | None = None

    @classmethod
    def constant(cls, fim, name="constant"):
        """Model whose Fisher matrix is ``fim`` at every theta (covering oracles only)."""
        f = np.atleast_2d(np.asarray(fim, dtype=np.float64))
        d = f.shape[0]
        return cls(name, np.zeros((1, d)), np.ones(1), np.full(d, 0.5), fixed_fim=f)

    @property
    def d(self) -> int:
        return self.xs.shape[1]

    def prob(self, thetas):
        """``p_theta(y=1|x)`` for thetas (G, d); returns (G, m)."""
        u = self.gain * np.atleast_2d(thetas) @ self.xs.T - self.offset
        return self.alpha + (1 - 2 * self.alpha) * expit(u)

    def fim(self, thetas):
        """Exact Fisher matrices (G, d, d) of the joint model ``p(x) p_theta(y|x)``."""
        th = np.atleast_2d(thetas)
        if self.fixed_fim is not None:
            return np.broadcast_to(self.fixed_fim, (len(th),) + self.fixed_fim.shape).copy()
        u = self.gain * th @ self.xs.T - self.offset
        s = expit(u)
        p = self.alpha + (1 - 2 * self.alpha) * s
        dp = (1 - 2 * self.alpha) * s * (1 - s) * self.gain
        w = self.px * dp * dp / (p * (1 - p))
        return np.einsum("gm,mi,mj->gij", w, self.xs, self.xs)

    def joint(self):
        """True ``p(x, y)`` as an (m, 2) table (columns y=0, y=1)."""
        p1 = self.prob(self.theta_star)[0]
        return np.stack([self.px * (1 - p1), self.px * p1], axis=1)

    def normalization(self, nodes=48):
        """``d / E_theta[Tr F]`` under the uniform measure on the cube (0 for a trivial model)."""
        pts, wts = _gauss_cube(self.d, nodes)
        tr = float(np.sum(wts * np.trace(self.fim(pts), axis1=1, axis2=2)))
        return self.d / tr if tr > 0 else 0.0


def bundled_toys():
    """The three toys used by the covering and generalization suites, plus a trivial one."""
    return {
        "bern1d": ToyModel("bern1d", np.array([[0.5], [1.0], [1.5], [2.0]]), np.full(4, 0.25),
                           np.array([0.4]), gain=3.0, offset=1.5),
        "bern2d": ToyModel("bern2d", np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]]),
                           np.full(4, 0.25), np.array([0.3, 0.7]), gain=3.0, offset=1.0),
        "bern2d_rank1": ToyModel("bern2d_rank1", np.array([[0.5, 0.5], [1.0, 1.0], [1.5, 1.5]]),
                                 np.full(3, 1 / 3), np.array([0.5, 0.5]), gain=2.0, offset=1.5),
        "trivial": ToyModel("trivial", np.zeros((1, 2)), np.ones(1), np.array([0.5, 0.5])),
    }


def _gauss_cube(d, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    x, w = (x + 1) / 2, w / 2
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wg = np.meshgrid(*([w] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wg], axis=1), axis=1)
    return pts, wts


def toy_two_sed(tm: ToyModel, epsilon, zeta=0.0, nodes=48):
    """2sED of a toy by tensor Gauss-Legendre quadrature over the parameter cube."""
    pts, wts = _gauss_cube(tm.d, nodes)
    lam = np.clip(np.linalg.eigvalsh(tm.fim(pts) * tm.normalization(nodes)), 0.0, None)
    c = epsilon ** (zeta - 1)
    ld = np.sum(np.log1p(c * np.sqrt(lam)), axis=1)
    if not ld.any():
        # quadrature weights sum to 1 only up to rounding
        return zeta * tm.d
    return zeta * tm.d + (1 - zeta) * float(logsumexp(ld, b=wts)) / abs((zeta - 1) * np.log(epsilon))


def toy_fim_mc(tm: ToyModel, theta, n, seed):
    """Monte Carlo Fisher estimate at ``theta`` and entrywise standard errors."""
    rng = rng_for(seed, STREAM_DATA, 11)
    theta = np.asarray(theta, dtype=np.float64)
    xi = rng.choice(len(tm.px), size=n, p=tm.px)
    p = tm.prob(theta)[0][xi]
    y = (rng.random(n) < p).astype(np.float64)
    u = tm.gain * tm.xs[xi] @ theta - tm.offset
    s = expit(u)
    dp = (1 - 2 * tm.alpha) * s * (1 - s) * tm.gain
    g = ((y - p) / (p * (1 - p)) * dp)[:, None] * tm.xs[xi]
    prods = g[:, :, None] * g[:, None, :]
    return empirical_fim(g), prods.std(axis=0, ddof=1) / np.sqrt(n)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class CheckReport:
    rows: list = field(default_factory=list)

    def add(self, check, param, lhs, rhs, ok=None):
        margin = float(rhs) - float(lhs)
        self.rows.append((check, str(param), float(lhs), float(rhs), margin,
                          bool(margin >= 0 if ok is None else ok)))

    def extend(self, other: "CheckReport"):
        self.rows.extend(other.rows)
        return self

    @property
    def passed(self) -> bool:
        return all(r[5] for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r[5]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "param", "lhs", "rhs", "margin", "pass"])
        for c, p, lhs, rhs, m, ok in self.rows:
            w.writerow([c, p, f"{lhs:.17g}", f"{rhs:.17g}", f"{m:.17g}", int(ok)])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# covering numbers
# ---------------------------------------------------------------------------


@njit(cache=True)
def _toy_fim_at(theta, xs, px, gain, offset, alpha, cnorm):
    d = xs.shape[1]
    out = np.zeros((d, d))
    for m in range(xs.shape[0]):
        u = gain * np.dot(xs[m], theta) - offset
        s = 1.0 / (1.0 + np.exp(-u))
        p = alpha + (1 - 2 * alpha) * s
        dp = (1 - 2 * alpha) * s * (1 - s) * gain
        w = px[m] * dp * dp / (p * (1 - p)) * cnorm
        for i in range(d):
            for j in range(d):
                out[i, j] += w * xs[m, i] * xs[m, j]
    return out


@njit(cache=True)
def _metric_at(theta, xs, px, gain, offset, alpha, cnorm, fixed, use_fixed):
    if use_fixed:
        return fixed * cnorm
    return _toy_fim_at(theta, xs, px, gain, offset, alpha, cnorm)


@njit(cache=True)
def _quad(a, idx, c, h, d):
    q = 0.0
    for r_ in range(d):
        for c_ in range(d):
            q += (idx[r_] - c[r_]) * h * a[r_, c_] * (idx[c_] - c[c_]) * h
    return q


@njit(cache=True)
def _ball(covered, res, d, h, eps, cen, a, mark):
    """Count (and optionally mark) uncovered grid points inside the ball at ``cen``."""
    eps2 = eps * eps
    w, u = np.linalg.eigh(a)
    wmax = max(w[d - 1], 0.0)
    last = d - 1
    lo = np.zeros(3, np.int64)
    hi = np.zeros(3, np.int64)
    for i in range(3):
        if i >= last:
            lo[i] = cen[i]
            hi[i] = cen[i]
            continue
        acc = 0.0
        unbounded = False
        for k in range(d):
            if w[k] <= 1e-14 * wmax or w[k] <= 0.0:
                if abs(u[i, k]) > 1e-12:
                    unbounded = True
            else:
                acc += u[i, k] * u[i, k] / w[k]
        if unbounded:
            lo[i] = 0
            hi[i] = res - 1
        else:
            r = eps * np.sqrt(acc) / h + 1.0
            lo[i] = max(0, int(np.floor(cen[i] - r)))
            hi[i] = min(res - 1, int(np.ceil(cen[i] + r)))
    delta = np.zeros(3)
    all_ = a[last, last]
    n_new = 0
    # each row along the last axis meets the ball in one interval
    for i0 in range(lo[0], hi[0] + 1):
        for i1 in range(lo[1], hi[1] + 1):
            b = 0.0
            c0 = 0.0
            if d > 1:
                delta[0] = (i0 - cen[0]) * h
                if d > 2:
                    delta[1] = (i1 - cen[1]) * h
                for r_ in range(last):
                    b += a[last, r_] * delta[r_]
                    for c_ in range(last):
                        c0 += delta[r_] * a[r_, c_] * delta[c_]
            rest = eps2 - c0
            if all_ > 0.0:
                disc = b * b + all_ * rest
                if disc <= 0.0:
                    continue
                sq = np.sqrt(disc)
                j_lo = max(int(np.floor((-b - sq) / all_ / h)) + cen[last], 0)
                j_hi = min(int(np.ceil((-b + sq) / all_ / h)) + cen[last], res - 1)
            else:
                if rest <= 0.0:
                    continue
                j_lo = 0
                j_hi = res - 1
            if d == 3:
                base = (i0 * res + i1) * res
            elif d == 2:
                base = i0 * res
            else:
                base = 0
            for j in range(j_lo, j_hi + 1):
                f = base + j
                if covered[f]:
                    continue
                if all_ > 0.0:
                    t = (j - cen[last]) * h
                    if all_ * t * t + 2.0 * b * t + c0 >= eps2:
                        continue
                n_new += 1
                if mark:
                    covered[f] = True
    return n_new


@njit(cache=True)
def _place(idx, cen, theta, dist, direction, res, d, h, xs, px, gain, offset, alpha, cnorm,
           fixed, use_fixed, eps2):
    """Set ``cen`` to idx + dist * direction (grid units); True if its ball holds idx."""
    for i in range(3):
        cen[i] = idx[i]
    for i in range(d):
        c = int(np.rint(idx[i] + dist * direction[i]))
        cen[i] = min(max(c, 0), res - 1)
    for i in range(d):
        theta[i] = cen[i] * h
    a = _metric_at(theta, xs, px, gain, offset, alpha, cnorm, fixed, use_fixed)
    return _quad(a, idx, cen, h, d) < eps2


@njit(cache=True)
def _greedy_cover(res, xs, px, gain, offset, alpha, cnorm, fixed, use_fixed, eps):
    d = xs.shape[1]
    total = res ** d
    covered = np.zeros(total, np.bool_)
    h = 1.0 / (res - 1)
    eps2 = eps * eps
    count = 0
    idx = np.zeros(3, np.int64)
    cen = np.zeros(3, np.int64)
    best = np.zeros(3, np.int64)
    theta = np.zeros(d)
    dirs = np.zeros((d + 1, d))
    for flat in range(total):
        if covered[flat]:
            continue
        count += 1
        rem = flat
        for i in range(d - 1, -1, -1):
            idx[i] = rem % res
            rem //= res
        for i in range(d):
            theta[i] = idx[i] * h
        a0 = _metric_at(theta, xs, px, gain, offset, alpha, cnorm, fixed, use_fixed)
        # candidate centres: slide forward along each axis and along the
        # stiffest direction, as far as the ball still holds the uncovered point
        w, u = np.linalg.eigh(a0)
        for i in range(d):
            dirs[0, i] = u[i, d - 1]
        for i in range(d):
            if abs(dirs[0, i]) > 1e-12:
                if dirs[0, i] < 0:
                    for k in range(d):
                        dirs[0, k] = -dirs[0, k]
                break
        for k in range(d):
            for i in range(d):
                dirs[k + 1, i] = 1.0 if i == k else 0.0
        for i in range(3):
            best[i] = idx[i]
        best_a = a0
        best_n = -1
        for k in range(d + 1):
            stiff = 0.0
            for r_ in range(d):
                for c_ in range(d):
                    stiff += dirs[k, r_] * a0[r_, c_] * dirs[k, c_]
            if stiff <= 0.0:
                continue
            step = eps / np.sqrt(stiff) / h
            # coarse scan for the largest admissible fraction, then bisect
            f_ok = -1.0
            f_bad = 1.0
            for s in range(20, 0, -1):
                if _place(idx, cen, theta, step * s / 20.0, dirs[k], res, d, h, xs, px, gain,
                          offset, alpha, cnorm, fixed, use_fixed, eps2):
                    f_ok = s / 20.0
                    break
                f_bad = s / 20.0
            if f_ok < 0.0:
                continue
            if f_ok < 1.0:
                for _ in range(12):
                    mid = 0.5 * (f_ok + f_bad)
                    if _place(idx, cen, theta, step * mid, dirs[k], res, d, h, xs, px, gain,
                              offset, alpha, cnorm, fixed, use_fixed, eps2):
                        f_ok = mid
                    else:
                        f_bad = mid
            _place(idx, cen, theta, step * f_ok, dirs[k], res, d, h, xs, px, gain,
                   offset, alpha, cnorm, fixed, use_fixed, eps2)
            a = _metric_at(theta, xs, px, gain, offset, alpha, cnorm, fixed, use_fixed)
            n_new = _ball(covered, res, d, h, eps, cen, a, False)
            if n_new > best_n:
                best_n = n_new
                best_a = a
                for i in range(3):
                    best[i] = cen[i]
        _ball(covered, res, d, h, eps, best, best_a, True)
        covered[flat] = True
    return count


MAX_GRID_POINTS = 10 ** 7


def default_grid_res(tm: ToyModel, epsilon, nodes=48):
    """Grid whose spacing is a small fraction of the smallest ball half-width.

    The fraction is ``max(16, 1/half-width)``, capped by the point budget, so
    the discretization error in the count stays below one ball in one dimension.
    """
    pts, _ = _gauss_cube(tm.d, nodes)
    lam = np.linalg.eigvalsh(tm.fim(pts) * tm.normalization(nodes))
    lam_max = float(np.max(lam)) if lam.size else 0.0
    inv_hw = np.sqrt(max(lam_max, 1e-300)) / epsilon
    res = int(math.ceil(min(inv_hw * max(16.0, inv_hw), 1e12))) + 1
    cap = int(MAX_GRID_POINTS ** (1.0 / tm.d))
    return max(2, min(res, cap))


def covering_count(tm: ToyModel, epsilon, grid_res=None) -> int:
    """Greedy count of Fisher balls of radius ``epsilon`` covering a grid on ``[0,1]^d``.

    Grid points are scanned in row-major order.  For each still-uncovered
    point, candidate centres are slid forward along each axis and along the
    metric's stiffest direction as far as the ball still contains that point;
    the candidate covering the most new points wins, and every grid point inside it
    (measured with the normalized Fisher matrix at the centre) is marked as
    covered.
    """
    if tm.d > 3:
        raise TooLarge(f"covering_count supports d <= 3, got {tm.d}")
    if grid_res is None:
        grid_res = default_grid_res(tm, epsilon)
    if grid_res < 2 or grid_res ** tm.d > MAX_GRID_POINTS:
        raise TooLarge(f"grid of {grid_res}^{tm.d} points exceeds {MAX_GRID_POINTS}")
    use_fixed = tm.fixed_fim is not None
    fixed = tm.fixed_fim if use_fixed else np.zeros((tm.d, tm.d))
    return int(_greedy_cover(int(grid_res), np.ascontiguousarray(tm.xs, dtype=np.float64),
                             np.ascontiguousarray(tm.px, dtype=np.float64), float(tm.gain),
                             float(tm.offset), float(tm.alpha), float(tm.normalization()),
                             np.ascontiguousarray(fixed, dtype=np.float64), use_fixed, float(epsilon)))


def covering_slope_check(tm: ToyModel, eps_list, c_slack=None, grid_res=None) -> CheckReport:
    """``log N(eps) / |log eps| <= d_0(eps) + log(C) / |log eps|`` for every eps.

    ``C`` defaults to ``10**d``; the check tests growth order, not the sharp constant.
    """
    eps_list = sorted(float(e) for e in eps_list)
    if len(eps_list) < 3 or eps_list[-1] / eps_list[0] < 10:
        raise ValueError("need at least 3 radii spanning at least one decade")
    c = 10.0 ** tm.d if c_slack is None else float(c_slack)
    rep = CheckReport()
    for e in eps_list:
        n = covering_count(tm, e, grid_res)
        le = abs(np.log(e))
        rep.add(f"covering:{tm.name}", e, np.log(n) / le, toy_two_sed(tm, e, 0.0) + np.log(c) / le)
    return rep


# ---------------------------------------------------------------------------
# generalization gap
# ---------------------------------------------------------------------------


def _loss_table(tm: ToyModel, theta_grid_res, b0):
    axes = [np.linspace(0.0, 1.0, theta_grid_res)] * tm.d
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    p1 = tm.prob(grid)                       # (G, m)
    q1 = tm.prob(tm.theta_star)[0]           # (m,)
    cap = 2.0 * b0
    l0 = np.minimum(np.abs((1 - p1) - (1 - q1)), cap)
    l1 = np.minimum(np.abs(p1 - q1), cap)
    return np.stack([l0, l1], axis=2).reshape(len(grid), -1)   # (G, m*2)


def generalization_gap_from_frequencies(tm: ToyModel, freqs, theta_grid_res=101, b0=0.5):
    """``max_theta |R(theta) - R_n(theta)|`` for empirical (x, y) frequencies shaped (m, 2)."""
    table = _loss_table(tm, theta_grid_res, b0)
    diff = tm.joint().ravel() - np.asarray(freqs, dtype=np.float64).ravel()
    return float(np.max(np.abs(table @ diff)))


def generalization_gap(tm: ToyModel, n, seed, theta_grid_res=101, b0=0.5):
    """Generalization error on ``n`` seeded draws from the toy's data distribution.

    The loss is ``min(|a - b|, 2 b0)`` between model and true conditional
    probabilities of the observed label; the supremum runs over a grid of
    ``theta_grid_res`` points per axis.
    """
    pj = tm.joint().ravel()
    counts = rng_for(seed, STREAM_DATA, 13, int(n)).multinomial(int(n), pj / pj.sum())
    return generalization_gap_from_frequencies(tm, counts.reshape(-1, 2) / n, theta_grid_res, b0)


def eps_n(n, gamma=1.0):
    """Rate ``(log n / (gamma n))^(3/8)``."""
    return (np.log(n) / (gamma * n)) ** 0.375


def rate_shape_check(tm: ToyModel, n_list, gamma=1.0, n_seeds=20, theta_grid_res=101, gap_fn=None):
    """Fit the rate envelope on the smaller half of ``n_list``; test it on the larger half."""
    ns = sorted(int(n) for n in n_list)
    if ns[-1] / ns[0] < 100:
        raise ValueError("n_list must span at least two decades")
    gap_fn = gap_fn or (lambda n, s: generalization_gap(tm, n, s, theta_grid_res))
    mean_gap = {n: float(np.mean([gap_fn(n, s) for s in range(n_seeds)])) for n in ns}
    half = len(ns) // 2
    c_hat = max(mean_gap[n] / eps_n(n, gamma) for n in ns[:half])
    rep = CheckReport()
    for n in ns[half:]:
        rep.add(f"rate:{tm.name}", n, mean_gap[n], c_hat * eps_n(n, gamma))
    rep.mean_gap = mean_gap
    rep.c_hat = c_hat
    return rep


# ---------------------------------------------------------------------------
# bounds on effective dimension
# ---------------------------------------------------------------------------


def upper_bound_check(ens: SpectrumEnsemble, eps_grid, zeta=0.0, name="ensemble") -> CheckReport:
    """``d_zeta(eps) <= zeta d + r (1 - zeta + log(1 + sqrt(mu)) / |log eps|)`` at every eps."""
    r = rank_estimate(ens)
    mu = ens.max_eigenvalue()
    rep = CheckReport()
    for e in eps_grid:
        rhs = zeta * ens.d + r * (1 - zeta + np.log1p(np.sqrt(mu)) / abs(np.log(e)))
        rep.add(f"upper_bound:{name}", e, two_sed(ens, e, zeta), rhs + 1e-9)
    return rep


def rank_limit_check(ens: SpectrumEnsemble, epsilon=1e-10, zeta=0.0, name="ensemble") -> CheckReport:
    """Distance of ``d_zeta(eps)`` from its small-radius limit ``zeta d + (1 - zeta) r``."""
    r = rank_estimate(ens)
    mu = ens.max_eigenvalue()
    lhs = abs(two_sed(ens, epsilon, zeta) - (zeta * ens.d + (1 - zeta) * r))
    rep = CheckReport()
    rep.add(f"rank_limit:{name}", epsilon, lhs, r * np.log1p(np.sqrt(mu)) / abs(np.log(epsilon)) + 1e-9)
    return rep


def jensen_check(ens: SpectrumEnsemble, eps_grid, zeta=0.0, name="ensemble", slack=1e-9) -> CheckReport:
    rep = CheckReport()
    for e in eps_grid:
        rep.add(f"jensen:{name}", e, lower_two_sed(ens, e, zeta)[0], two_sed(ens, e, zeta) + slack)
    return rep


def sigma_invariance_check(model="MLP 8-5", sigmas=(1e-2, 1e-4), n=40, n_thetas=3, seed=0,
                           tol=1e-6) -> CheckReport:
    """Normalized Fisher blocks of a one-block model do not depend on ``sigma2``.

    Noise draws are shared across variances (the same standard-normal draws
    scaled by ``sqrt(sigma2)``).  Error is measured entrywise relative to the
    largest entry.
    """
    base = parse_model_string(model)
    if len(base.blocks) != 1:
        raise ValueError("sigma invariance is exact only for one-block models")
    x = rng_for(seed, STREAM_DATA, 17).standard_normal((n,) + tuple(base.input_shape))
    ens = []
    for s2 in sigmas:
        spec = base.with_sigma2(s2)
        raw = [block_fim(spec, sample_params(spec, seed, theta_index=k), x, seed, theta_index=k)
               for k in range(n_thetas)]
        ens.append(normalize_ensemble(raw, spec.d))
    rep = CheckReport()
    ref = ens[0]
    for s2, other in zip(sigmas[1:], ens[1:]):
        worst = 0.0
        for a, b in zip(ref.per_theta, other.per_theta):
            for fa, fb in zip(a.blocks, b.blocks):
                worst = max(worst, float(np.max(np.abs(fa - fb)) / max(np.max(np.abs(fa)), 1e-300)))
        rep.add("sigma_invariance", s2, worst, tol)
    return rep


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

COVERING_EPS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
GENBOUND_NS = (100, 1000, 10000, 100000)


def _bounds_suite():
    rep = CheckReport()
    grid = np.logspace(-1, -8, 15)
    ensembles = {
        "constant_d10": SpectrumEnsemble.constant(np.linspace(0.5, 1.5, 10), K=4),
        "trivial": SpectrumEnsemble.constant(np.zeros(6), K=3, block_dims=(4, 2)),
    }
    rng = rng_for(0, STREAM_DATA, 19)
    spectra = []
    for _ in range(30):
        g = rng.standard_normal((3, 5))
        w1 = np.clip(np.linalg.eigvalsh(g.T @ g), 0, None)
        w2 = rng.uniform(0, 2, 3)
        spectra.append([w1, w2])
    tot = np.mean([sum(w.sum() for w in row) for row in spectra])
    ensembles["random_rank"] = SpectrumEnsemble([[8 / tot * w for w in row] for row in spectra], 8, (5, 3))
    for name, ens in ensembles.items():
        rep.extend(upper_bound_check(ens, grid, 0.0, name))
        rep.extend(upper_bound_check(ens, grid, 0.5, name))
        rep.extend(jensen_check(ens, grid, 0.0, name))
    rep.extend(rank_limit_check(ensembles["constant_d10"], 1e-10, 0.0, "constant_d10"))
    return rep


def _covering_suite():
    rep = CheckReport()
    for name, tm in bundled_toys().items():
        if name == "trivial":
            continue
        rep.extend(covering_slope_check(tm, COVERING_EPS))
    return rep


def _genbound_suite():
    tm = bundled_toys()["bern1d"]
    rep = rate_shape_check(tm, GENBOUND_NS, gamma=1.0, n_seeds=20)
    g = rep.mean_gap
    rep.add("gap_decreases:bern1d", "1e4<1e2", g[10000], g[100], ok=g[10000] < g[100])
    return rep


def _sigma_suite():
    return sigma_invariance_check()


SUITES = {
    "bounds": _bounds_suite,
    "covering": _covering_suite,
    "genbound": _genbound_suite,
    "sigma": _sigma_suite,
}


def run_suite(name) -> CheckReport:
    if name == "all":
        rep = CheckReport()
        for fn in SUITES.values():
            rep.extend(fn())
        return rep
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()
