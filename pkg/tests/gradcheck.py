"""Finite-difference oracle for block log-likelihood gradients (shared by tests)."""
import numpy as np

from twosed.netmodel import Conv, Flatten, Linear, block_grad_loglik

STEP = 1e-5
KINK_MARGIN = 1e-3   # instances this close to a ReLU or pooling kink are redrawn
REL_TOL = 1e-4


def loglik(block, theta, x_prev, x_j, sigma2):
    o, _ = block.forward(theta, x_prev[None])
    return -0.5 * float(np.sum((x_j - o[0]) ** 2)) / sigma2


def kink_distance(block, theta, x_prev):
    """Smallest distance of any ReLU argument (or top-two pooling gap) from a kink."""
    _, cache = block.forward(theta, x_prev[None])
    if isinstance(block, Linear):
        return float(np.min(np.abs(cache[1]))) if block.relu else np.inf
    if isinstance(block, Flatten):
        return np.inf
    dist = float(np.min(np.abs(cache["z"])))
    if block.with_pool:
        a = np.maximum(cache["z"], 0.0)
        n, c, h, w = a.shape
        h2, w2 = h // 2, w // 2
        win = a[:, :, : 2 * h2, : 2 * w2].reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
        win = np.sort(win.reshape(n, c, h2, w2, 4), axis=-1)
        live = win[..., -1] > 0
        if np.any(live):
            dist = min(dist, float(np.min((win[..., -1] - win[..., -2])[live])))
    return dist


def random_instance(kind, rng):
    if kind == "linear":
        block = Linear(int(rng.integers(1, 7)), int(rng.integers(1, 6)), relu=bool(rng.integers(2)),
                       bias=bool(rng.integers(2)))
        x_prev = rng.standard_normal(block.in_shape)
    elif kind == "conv":
        k = int(rng.integers(1, 4))
        pad = int(rng.integers(0, 2))
        size = int(rng.integers(k + 1, 7))
        block = Conv(k, int(rng.integers(1, 3)), int(rng.integers(1, 4)), size, size,
                     with_pool=bool(rng.integers(2)), with_norm=bool(rng.integers(2)), padding=pad)
        x_prev = rng.standard_normal(block.in_shape)
    elif kind == "flatten":
        block = Flatten(int(rng.integers(1, 5)), int(rng.integers(1, 4)))
        x_prev = rng.standard_normal(block.in_shape)
    else:
        raise ValueError(kind)
    theta = rng.uniform(-1, 1, block.n_params)
    if isinstance(block, Conv) and block.with_norm:
        theta[block.n_kernel: block.n_kernel + block.out_channels] = rng.uniform(0.5, 1.5, block.out_channels)
    sigma2 = float(rng.uniform(0.1, 1.0))
    o, _ = block.forward(theta, x_prev[None])
    x_j = o[0] + np.sqrt(sigma2) * rng.standard_normal(o.shape[1:])
    return block, theta, x_prev, x_j, sigma2


def relative_error(block, theta, x_prev, x_j, sigma2):
    """max |analytic - central difference| over max |central difference|."""
    g = block_grad_loglik(block, theta, x_prev, x_j, sigma2)
    fd = np.empty_like(theta)
    for i in range(len(theta)):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += STEP
        tm[i] -= STEP
        fd[i] = (loglik(block, tp, x_prev, x_j, sigma2) - loglik(block, tm, x_prev, x_j, sigma2)) / (2 * STEP)
    scale = max(float(np.max(np.abs(fd))), 1e-12)
    return float(np.max(np.abs(g - fd))) / scale


def run_checks(kind, n=100, seed=0):
    """Relative errors of ``n`` kink-free random instances of one block kind."""
    rng = np.random.default_rng([seed, {"linear": 1, "conv": 2, "flatten": 3}[kind]])
    errors, redrawn = [], 0
    while len(errors) < n:
        inst = random_instance(kind, rng)
        if kink_distance(*inst[:3]) < KINK_MARGIN:
            redrawn += 1
            continue
        errors.append(relative_error(*inst))
    return np.array(errors), redrawn
