"""Monte Carlo estimation of the block-diagonal empirical Fisher matrix.

For a Markovian model the Fisher matrix is block diagonal: block ``j`` is the
expected outer product of ``grad_{theta_j} log p(x_j | x_{j-1})`` along
sampled trajectories.  Off-diagonal blocks are zero and are never stored.
"""
from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .effdim import SpectrumEnsemble
from .errors import FormatError
from .linalg import as_sym, psd_clamp, sym_eigen
from .netmodel import ModelSpec, ParamVector, block_grad_loglik, forward_sample, sample_params

__all__ = [
    "BlockFisher",
    "FisherEnsemble",
    "block_fim",
    "empirical_fim",
    "normalize_ensemble",
    "ensemble_spectra",
    "estimate_spectra",
    "save_ensemble",
    "load_ensemble",
]


@dataclass
class BlockFisher:
    blocks: list
    n_samples: int

    @property
    def dims(self):
        return tuple(b.shape[0] for b in self.blocks)

    @property
    def trace(self) -> float:
        return float(sum(np.trace(b) for b in self.blocks))


@dataclass
class FisherEnsemble:
    per_theta: list
    normalization: float
    _spectra: SpectrumEnsemble | None = field(default=None, repr=False)

    @property
    def K(self):
        return len(self.per_theta)

    @property
    def dims(self):
        return self.per_theta[0].dims


def empirical_fim(grads) -> np.ndarray:
    """``(1/N) sum_i g_i g_i^T`` for gradient rows ``grads`` of shape (N, d)."""
    g = np.asarray(grads, dtype=np.float64)
    return as_sym(g.T @ g / len(g))


def _block_grads(spec, theta, inputs, seed, theta_index, trajectories_per_input, mean_propagation,
                 frozen=False):
    """Per-block gradient rows, one row per (input, trajectory)."""
    x0 = np.asarray(inputs, dtype=np.float64)
    n = len(x0)
    rows = [[] for _ in spec.blocks]
    for t in range(trajectories_per_input):
        idx = np.arange(n) + t * n
        traj = forward_sample(spec, theta, x0, seed, theta_index=theta_index,
                              sample_indices=idx, mean_propagation=mean_propagation)
        for j, blk in enumerate(spec.blocks):
            if frozen:
                rows[j].append(np.zeros((n, blk.n_params)))
            else:
                rows[j].append(block_grad_loglik(blk, theta.slices[j], traj.block_input(j),
                                                 traj.xs[j + 1], spec.sigma2))
    return [np.concatenate(r, axis=0) for r in rows]


def block_fim(spec: ModelSpec, theta: ParamVector, inputs, seed: int, theta_index: int = 0,
              trajectories_per_input: int = 1, mean_propagation=False, frozen=False) -> BlockFisher:
    """Empirical Fisher blocks from one sampled trajectory per input.

    All block gradients of a trajectory come from the same forward pass.
    ``frozen=True`` treats the parameters as fixed (the model is then constant
    in theta and every block is zero).
    """
    grads = _block_grads(spec, theta, inputs, seed, theta_index, trajectories_per_input,
                         mean_propagation, frozen)
    return BlockFisher([empirical_fim(g) for g in grads], len(grads[0]))


def normalize_ensemble(raw, d: int) -> FisherEnsemble:
    """Rescale every block by ``d / mean_k trace(F^(k))``; zero everything if that mean is 0."""
    mean_trace = float(np.mean([bf.trace for bf in raw]))
    c = d / mean_trace if mean_trace > 0 else 0.0
    per = [BlockFisher([c * b for b in bf.blocks], bf.n_samples) for bf in raw]
    return FisherEnsemble(per, c)


def _block_spectra(blocks, method="auto"):
    return [psd_clamp(sym_eigen(b, method=method)).eigenvalues for b in blocks]


def ensemble_spectra(fe: FisherEnsemble, method="auto") -> SpectrumEnsemble:
    """Clamped spectra of every normalized block; cached on the ensemble."""
    if fe._spectra is None:
        dims = fe.dims
        spectra = [_block_spectra(bf.blocks, method) for bf in fe.per_theta]
        fe._spectra = SpectrumEnsemble(spectra, int(sum(dims)), dims)
    return fe._spectra


@dataclass
class SpectraRun:
    """Result of :func:`estimate_spectra`: normalized spectra plus bookkeeping."""

    spectra: SpectrumEnsemble
    normalization: float
    raw_traces: np.ndarray
    ensemble: FisherEnsemble | None = None


def estimate_spectra(spec: ModelSpec, inputs, n_thetas: int, seed: int, threads: int = 1,
                     scheme="fan_in", trajectories_per_input=1, mean_propagation=False,
                     frozen=False, keep_blocks=False) -> SpectraRun:
    """Sample ``n_thetas`` parameter points and return the normalized spectra.

    Dense blocks are reduced to spectra as soon as they are formed (the
    normalization is a scalar, so it is applied to the eigenvalues
    afterwards).  Results do not depend on ``threads``.
    """

    def one(k):
        theta = sample_params(spec, seed, scheme, theta_index=k)
        if frozen:
            theta = ParamVector(tuple(np.zeros_like(s) for s in theta.slices))
        bf = block_fim(spec, theta, inputs, seed, theta_index=k,
                       trajectories_per_input=trajectories_per_input,
                       mean_propagation=mean_propagation, frozen=frozen)
        return bf.trace, _block_spectra(bf.blocks), (bf if keep_blocks else None)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(n_thetas)))
    else:
        results = [one(k) for k in range(n_thetas)]
    traces = np.array([r[0] for r in results])
    mean_trace = float(np.mean(traces))
    c = spec.d / mean_trace if mean_trace > 0 else 0.0
    spectra = [[c * w for w in r[1]] for r in results]
    ens = SpectrumEnsemble(spectra, spec.d, spec.block_dims)
    fe = None
    if keep_blocks:
        fe = normalize_ensemble([r[2] for r in results], spec.d)
    return SpectraRun(ens, c, traces, fe)


# Binary layout (little endian): int64 K, int64 L, L x int64 block dims,
# float64 normalization, then for each theta and each block the d_j x d_j
# matrix as row-major float64.


def save_ensemble(fe: FisherEnsemble, path):
    dims = fe.dims
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qq", fe.K, len(dims)))
        fh.write(struct.pack(f"<{len(dims)}q", *dims))
        fh.write(struct.pack("<d", fe.normalization))
        for bf in fe.per_theta:
            for b in bf.blocks:
                fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_ensemble(path, n_samples: int = 0) -> FisherEnsemble:
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise FormatError("truncated Fisher dump header")
    K, L = struct.unpack_from("<qq", data, 0)
    off = 16
    if K < 1 or L < 1 or len(data) < off + 8 * L + 8:
        raise FormatError("bad Fisher dump header")
    dims = struct.unpack_from(f"<{L}q", data, off)
    off += 8 * L
    (c,) = struct.unpack_from("<d", data, off)
    off += 8
    need = off + 8 * K * sum(d * d for d in dims)
    if len(data) != need:
        raise FormatError(f"Fisher dump has {len(data)} bytes, expected {need}")
    per = []
    for _ in range(K):
        blocks = []
        for d in dims:
            blocks.append(np.frombuffer(data, dtype="<f8", count=d * d, offset=off).reshape(d, d).copy())
            off += 8 * d * d
        per.append(BlockFisher(blocks, n_samples))
    return FisherEnsemble(per, c)
