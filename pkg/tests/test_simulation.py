"""The three-bundle simulation design and its recovery benchmark."""

import numpy as np
import pytest

from varsphere import (
    SimConfig,
    ValidationError,
    Weights,
    rand_discrepancy,
    run_benchmark,
    sample_resultants,
    simulate_latents,
    simulate_sample,
)
from varsphere.simulation import TRUTH, _quintile_codes


def w_dot_uniform(x, y):
    return float(np.mean(x * y))


def test_latents_are_standardized_and_orthogonal():
    rng = np.random.default_rng(3)
    for beta in (np.pi / 4.0, np.pi / 3.0, np.pi / 2.0):
        xi = simulate_latents(50, beta, rng)
        assert xi.shape == (50, 4)
        for j in range(4):
            assert np.mean(xi[:, j]) == pytest.approx(0.0, abs=1e-12)
            assert w_dot_uniform(xi[:, j], xi[:, j]) == pytest.approx(1.0, abs=1e-12)
        # the shared plane, and the distractor, are exactly orthogonal
        assert w_dot_uniform(xi[:, 0], xi[:, 1]) == pytest.approx(0.0, abs=1e-12)
        assert w_dot_uniform(xi[:, 0], xi[:, 3]) == pytest.approx(0.0, abs=1e-12)
        assert w_dot_uniform(xi[:, 1], xi[:, 3]) == pytest.approx(0.0, abs=1e-12)
        assert w_dot_uniform(xi[:, 2], xi[:, 3]) == pytest.approx(0.0, abs=1e-12)
        assert w_dot_uniform(xi[:, 2], xi[:, 0]) == pytest.approx(0.0, abs=1e-12)
        # the tilted factor correlates with the plane by construction
        expected = np.cos(beta) / np.sqrt(1.0 + np.cos(beta) ** 2)
        assert w_dot_uniform(xi[:, 2], xi[:, 1]) == pytest.approx(expected, abs=1e-12)


def test_right_angle_makes_all_latents_orthonormal():
    rng = np.random.default_rng(5)
    xi = simulate_latents(40, np.pi / 2.0, rng)
    gram = xi.T @ xi / 40.0
    assert np.allclose(gram, np.eye(4), atol=1e-12)


def test_quintile_codes_balance_and_order():
    rng = np.random.default_rng(7)
    for n in (30, 40, 47, 100):
        x = rng.standard_normal(n)
        codes = _quintile_codes(x)
        assert codes.min() == 1 and codes.max() == 5
        counts = np.bincount(codes, minlength=6)[1:]
        assert counts.min() >= n // 5
        assert counts.max() <= n // 5 + 1
        # codes respect the ordering of the underlying values
        order = np.argsort(x)
        assert np.all(np.diff(codes[order]) >= 0)


def test_sample_layout_and_truth():
    rng = np.random.default_rng(11)
    config = SimConfig(n=40, beta=np.pi / 3.0, sigma2=0.1)
    sample = simulate_sample(config, rng)
    assert sample.numeric.shape == (40, 17)
    assert sample.categorical.shape == (40, 4)
    assert sample.names == tuple(f"x{j}" for j in range(1, 22))
    assert np.array_equal(sample.truth, TRUTH)
    assert np.array_equal(
        sample.truth, np.array([0] * 7 + [1] * 5 + [2] * 5 + [0, 0, 1, 2])
    )
    rs = sample_resultants(sample)
    assert len(rs) == 21
    assert [r.label for r in rs] == [f"x{j}" for j in range(1, 22)]
    for r in rs:
        assert r.normed
        assert r.weights.same_as(Weights.uniform(40))


def test_bundles_separate_when_noise_is_small():
    # with beta = pi/2 and tiny noise, variables correlate strongly within
    # their own bundle and barely across bundles
    rng = np.random.default_rng(13)
    config = SimConfig(n=200, beta=np.pi / 2.0, sigma2=0.001)
    sample = simulate_sample(config, rng)
    rs = sample_resultants(sample)
    within = [rs[7].dot(rs[8]), rs[12].dot(rs[13])]
    across = [rs[7].dot(rs[12]), rs[0].dot(rs[12]), rs[0].dot(rs[7])]
    assert min(within) > 0.9
    assert max(across) < 0.2


def test_sim_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(n=4, beta=np.pi / 2.0, sigma2=0.1)
    with pytest.raises(ValidationError):
        SimConfig(n=30, beta=0.0, sigma2=0.1)
    with pytest.raises(ValidationError):
        SimConfig(n=30, beta=np.pi, sigma2=0.1)
    with pytest.raises(ValidationError):
        SimConfig(n=30, beta=np.pi / 2.0, sigma2=0.0)
    with pytest.raises(ValidationError):
        SimConfig(n=30, beta=np.pi / 2.0, sigma2=0.1, replications=0)
    with pytest.raises(ValidationError):
        SimConfig(n=30, beta=np.pi / 2.0, sigma2=0.1, theta_grid=(0.0, 1.5))


def test_rand_discrepancy_worked_examples():
    # identical partitions, with or without renaming, have no discrepancy
    assert rand_discrepancy([0, 0, 1, 1], [5, 5, 9, 9]) == 0.0
    # all singletons on both sides: no co-clustered pair exists at all
    assert rand_discrepancy([0, 1, 2], [2, 0, 1]) == 0.0
    # co-clustered pairs {01, 23} vs {02, 13}: every pair is in exactly one
    assert rand_discrepancy([0, 0, 1, 1], [0, 1, 0, 1]) == 1.0
    # one co-clustered pair each, disjoint: {ab} vs {cd}
    assert rand_discrepancy([0, 0, 1, 2], [0, 1, 2, 2]) == 1.0
    # {ab|c} vs {a|bc}: pair sets {ab} vs {bc} share nothing
    assert rand_discrepancy([0, 0, 1], [0, 1, 1]) == 1.0
    # moving one item out of a pair: p has {01}, q has none; union {01}
    assert rand_discrepancy([0, 0, 1], [0, 1, 2]) == 1.0
    # p co-clusters {01, 02, 12}, q co-clusters {01}: two pairs differ
    assert rand_discrepancy([0, 0, 0], [0, 0, 1]) == pytest.approx(2.0 / 3.0)
    # moving x21 from bundle C (6 members) to B (6 members) in the design
    # truth loses 5 co-pairs and gains 6: symdiff 11 over union 66 + 6
    flipped = TRUTH.copy()
    flipped[20] = 1
    assert rand_discrepancy(TRUTH, flipped) == pytest.approx(11.0 / 72.0)
    assert rand_discrepancy(flipped, TRUTH) == pytest.approx(11.0 / 72.0)
    with pytest.raises(ValidationError):
        rand_discrepancy([0, 1], [0, 1, 2])


def test_benchmark_shape_and_determinism():
    grid = [
        SimConfig(n=30, beta=np.pi / 2.0, sigma2=0.1, seed=9, replications=2,
                  theta_grid=(0.0, 1.0)),
        SimConfig(n=30, beta=np.pi / 4.0, sigma2=0.1, seed=9, replications=2,
                  theta_grid=(0.0, 1.0)),
    ]
    rows1 = run_benchmark(grid, n_starts=3)
    rows2 = run_benchmark(grid, n_starts=3)
    assert len(rows1) == 4
    assert rows1 == rows2
    for row in rows1:
        assert row.replications == 2
        assert row.failures == 0
        assert 0.0 <= row.mean_rand <= 1.0
        assert row.sd_rand >= 0.0
    # rows carry their design coordinates
    assert [(r.n, r.beta, r.theta) for r in rows1] == [
        (30, np.pi / 2.0, 0.0),
        (30, np.pi / 2.0, 1.0),
        (30, np.pi / 4.0, 0.0),
        (30, np.pi / 4.0, 1.0),
    ]


def test_benchmark_cells_do_not_depend_on_grid_order():
    a = SimConfig(n=30, beta=np.pi / 2.0, sigma2=0.15, seed=4, replications=2,
                  theta_grid=(0.5,))
    b = SimConfig(n=35, beta=np.pi / 3.0, sigma2=0.15, seed=4, replications=2,
                  theta_grid=(0.5,))
    fwd = run_benchmark([a, b], n_starts=2)
    rev = run_benchmark([b, a], n_starts=2)
    assert fwd[0] == rev[1]
    assert fwd[1] == rev[0]


def test_single_replication_reports_zero_sd():
    cfg = SimConfig(n=30, beta=np.pi / 2.0, sigma2=0.1, seed=1, replications=1,
                    theta_grid=(1.0,))
    row = run_benchmark([cfg], n_starts=2)[0]
    assert row.sd_rand == 0.0
    assert row.replications == 1
