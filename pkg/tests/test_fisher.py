import numpy as np
import pytest

from twosed.errors import FormatError
from twosed.fisher import (
    BlockFisher,
    block_fim,
    empirical_fim,
    ensemble_spectra,
    estimate_spectra,
    load_ensemble,
    normalize_ensemble,
    save_ensemble,
)
from twosed.netmodel import (
    Linear,
    ModelSpec,
    ParamVector,
    block_grad_loglik,
    forward_sample,
    parse_model_string,
    sample_params,
)


def test_dead_units_give_zero_block():
    spec = parse_model_string("MLP 3-4-2")
    theta = ParamVector((np.zeros(12), np.zeros(8)))
    x = np.random.default_rng(0).standard_normal((20, 3))
    bf = block_fim(spec, theta, x, seed=0)
    # first block: every preactivation is exactly 0, so the ReLU kills the gradient
    assert np.array_equal(bf.blocks[0], np.zeros((12, 12)))
    assert np.trace(bf.blocks[1]) > 0


def test_single_sample_scalar_block():
    spec = ModelSpec((Linear(1, 1, relu=False),), (1,), sigma2=0.3)
    w, a = 0.8, 1.7
    theta = ParamVector((np.array([w]),))
    bf = block_fim(spec, theta, np.array([[a]]), seed=4)
    b = forward_sample(spec, theta, np.array([[a]]), seed=4).xs[1][0, 0]
    assert bf.n_samples == 1
    assert bf.blocks[0][0, 0] == pytest.approx((a * (b - w * a) / 0.3) ** 2, rel=1e-13)


def test_matches_independent_accumulation():
    spec = parse_model_string("MLP 5-4-3-2")
    theta = sample_params(spec, 3)
    x = np.random.default_rng(1).standard_normal((50, 5))
    bf = block_fim(spec, theta, x, seed=7)
    # recompute every gradient one sample at a time and sum outer products in a loop
    oracle = [np.zeros((dj, dj)) for dj in spec.block_dims]
    for i in range(50):
        traj = forward_sample(spec, theta, x[i:i + 1], seed=7, sample_indices=[i])
        for j, blk in enumerate(spec.blocks):
            g = block_grad_loglik(blk, theta.slices[j], traj.xs[j][0], traj.xs[j + 1][0], spec.sigma2)
            for p in range(len(g)):
                for q in range(len(g)):
                    oracle[j][p, q] += g[p] * g[q] / 50
    for got, want in zip(bf.blocks, oracle):
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12 * np.abs(want).max())


def test_blocks_are_psd():
    spec = parse_model_string("MLP 6-5-4-3")
    rng = np.random.default_rng(2)
    for k in range(3):
        bf = block_fim(spec, sample_params(spec, 0, theta_index=k), rng.standard_normal((8, 6)), seed=k)
        for b in bf.blocks:
            assert np.array_equal(b, b.T)
            tr = np.trace(b)
            for v in rng.standard_normal((100, b.shape[0])):
                assert v @ b @ v >= -1e-10 * tr


def test_normalization_examples():
    zero = [BlockFisher([np.zeros((2, 2)), np.zeros((1, 1))], 5) for _ in range(3)]
    fe = normalize_ensemble(zero, 3)
    assert fe.normalization == 0.0
    assert all(np.array_equal(b, np.zeros_like(b)) for bf in fe.per_theta for b in bf.blocks)

    single = [BlockFisher([np.diag([2.0, 2.0]), np.array([[2.0]])], 1)]   # trace 6 = 2d
    fe = normalize_ensemble(single, 3)
    np.testing.assert_array_equal(fe.per_theta[0].blocks[0], np.eye(2))
    np.testing.assert_array_equal(fe.per_theta[0].blocks[1], np.ones((1, 1)))

    rng = np.random.default_rng(3)
    raw = []
    for _ in range(3):
        g = rng.standard_normal((4, 5))
        raw.append(BlockFisher([g[:, :2].T @ g[:, :2], g[:, 2:].T @ g[:, 2:]], 4))
    fe = normalize_ensemble(raw, 5)
    mean_trace = np.mean([bf.trace for bf in fe.per_theta])
    assert mean_trace == pytest.approx(5.0, rel=1e-9)


def test_ensemble_spectra_examples():
    fe = normalize_ensemble([BlockFisher([np.array([[0.3]]), np.array([[1.7]])], 1)], 2)
    ens = ensemble_spectra(fe)
    assert ens.spectra[0][0][0] == pytest.approx(0.3 * 2 / 2.0)
    assert ens.spectra[0][1][0] == pytest.approx(1.7 * 2 / 2.0)
    assert ensemble_spectra(fe) is ens
    rng = np.random.default_rng(4)
    g = rng.standard_normal((7, 5))
    fe = normalize_ensemble([BlockFisher([g.T @ g], 7)], 5)
    w = ensemble_spectra(fe).spectra[0][0]
    assert w.sum() == pytest.approx(np.trace(fe.per_theta[0].blocks[0]), rel=1e-8)


def test_estimate_spectra_normalization_identity():
    spec = parse_model_string("MLP 6-4-3")
    x = np.random.default_rng(5).standard_normal((30, 6))
    run = estimate_spectra(spec, x, 12, seed=1)
    total = np.mean([sum(float(w.sum()) for w in row) for row in run.spectra.spectra])
    assert total == pytest.approx(spec.d, rel=1e-9)


def test_single_block_sigma_invariance():
    spec = parse_model_string("MLP 5-3")
    theta = sample_params(spec, 0)
    x = np.random.default_rng(6).standard_normal((40, 5))
    traces, norm = [], []
    for s2 in (1e-2, 1e-4):
        # the same seed gives the same standard-normal draws, scaled by sqrt(s2)
        bf = block_fim(spec.with_sigma2(s2), theta, x, seed=11)
        norm.append(normalize_ensemble([bf], spec.d).per_theta[0].blocks[0])
        traces.append(bf.trace)
    assert traces[1] / traces[0] == pytest.approx(100.0, rel=1e-9)
    np.testing.assert_allclose(norm[0], norm[1], rtol=1e-6, atol=1e-6 * np.abs(norm[0]).max())


def test_bitwise_determinism():
    spec = parse_model_string("MLP 5-4-3")
    theta = sample_params(spec, 0)
    x = np.random.default_rng(7).standard_normal((10, 5))
    a, b = block_fim(spec, theta, x, seed=2), block_fim(spec, theta, x, seed=2)
    assert all(np.array_equal(p, q) for p, q in zip(a.blocks, b.blocks))


def test_thread_count_does_not_change_spectra():
    spec = parse_model_string("MLP 5-4-3")
    x = np.random.default_rng(8).standard_normal((10, 5))
    a = estimate_spectra(spec, x, 6, seed=3, threads=1)
    b = estimate_spectra(spec, x, 6, seed=3, threads=4)
    for ra, rb in zip(a.spectra.spectra, b.spectra.spectra):
        assert all(np.array_equal(p, q) for p, q in zip(ra, rb))


def test_linear_gaussian_closed_form():
    # x_1 = W x_0 + sigma z: the Fisher of W is (1/sigma^2) E[x x^T] per output row
    spec = ModelSpec((Linear(2, 2, relu=False),), (2,), sigma2=0.25)
    theta = ParamVector((np.array([0.3, -0.2, 0.5, 0.1]),))
    n = 100_000
    x = np.random.default_rng(9).standard_normal((n, 2)) * [1.0, 2.0] + [0.5, 0.0]
    bf = block_fim(spec, theta, x, seed=5)
    exact = np.kron(np.eye(2), x.T @ x / n) / spec.sigma2
    g = block_grad_loglik(spec.blocks[0], theta.slices[0], x,
                          forward_sample(spec, theta, x, seed=5).xs[1], spec.sigma2)
    prods = g[:, :, None] * g[:, None, :]
    se = prods.std(axis=0, ddof=1) / np.sqrt(n)
    assert np.all(np.abs(bf.blocks[0] - exact) <= 3 * se + 1e-12)


def test_dump_round_trip(tmp_path):
    spec = parse_model_string("MLP 4-3-2")
    x = np.random.default_rng(10).standard_normal((6, 4))
    run = estimate_spectra(spec, x, 3, seed=0, keep_blocks=True)
    path = tmp_path / "f.bin"
    save_ensemble(run.ensemble, path)
    raw = path.read_bytes()
    assert int.from_bytes(raw[:8], "little") == 3 and int.from_bytes(raw[8:16], "little") == 2
    back = load_ensemble(path)
    assert back.normalization == run.ensemble.normalization
    for a, b in zip(run.ensemble.per_theta, back.per_theta):
        assert all(np.array_equal(p, q) for p, q in zip(a.blocks, b.blocks))
    path.write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        load_ensemble(path)
    path.write_bytes(raw[:10])
    with pytest.raises(FormatError):
        load_ensemble(path)


def test_empirical_fim_is_mean_outer_product():
    g = np.array([[1.0, 2.0], [3.0, -1.0]])
    np.testing.assert_allclose(empirical_fim(g), (np.outer(g[0], g[0]) + np.outer(g[1], g[1])) / 2)


def test_frozen_model_is_trivial():
    spec = parse_model_string("MLP 4-3-2")
    x = np.random.default_rng(11).standard_normal((5, 4))
    run = estimate_spectra(spec, x, 4, seed=0, frozen=True)
    assert run.normalization == 0.0
    assert all(np.all(w == 0) for row in run.spectra.spectra for w in row)
