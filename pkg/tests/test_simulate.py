import numpy as np
import pytest
from scipy import stats

from mhpkit import HawkesParams, SimulationConfig, ValidationError, simulate_cluster, simulate_thinning
from mhpkit.simulate import cluster_path, simulate_thinning_dataset


def test_zero_baseline_gives_empty_paths():
    p = HawkesParams([0.0, 0.0], [[0.2, 0.1], [0.1, 0.2]], 1.0)
    data = simulate_cluster(SimulationConfig(p, 10.0, 50, seed=0, allow_degenerate=True))
    assert data.total_events() == 0


def test_zero_baseline_rejected_by_default():
    p = HawkesParams([0.0], [[0.2]], 1.0)
    with pytest.raises(ValidationError, match="strictly positive"):
        SimulationConfig(p, 10.0, 5)


def test_supercritical_rejected():
    with pytest.raises(ValidationError, match="spectral radius"):
        SimulationConfig(HawkesParams([1.0], [[1.1]], 1.0), 10.0, 5)


@pytest.mark.parametrize("kw", [{"end_time": 0.0}, {"n_samples": 0}])
def test_config_checks(kw):
    args = {"params": HawkesParams([1.0], [[0.1]], 1.0), "end_time": 1.0, "n_samples": 1}
    args.update(kw)
    with pytest.raises(ValidationError):
        SimulationConfig(**args)


def test_poisson_mean_count():
    p = HawkesParams([2.0], [[0.0]], 1.0)
    data = simulate_cluster(SimulationConfig(p, 10.0, 10_000, seed=3))
    counts = np.array([path.counts()[0] for path in data])
    assert abs(counts.mean() - 20.0) <= 3 * np.sqrt(20.0 / 10_000)


def test_seed_determinism_and_thread_independence(small_params):
    cfg = SimulationConfig(small_params, 5.0, 40, seed=42)
    a = simulate_cluster(cfg)
    b = simulate_cluster(cfg)
    c = simulate_cluster(cfg, n_jobs=4)
    assert a == b == c
    assert simulate_cluster(SimulationConfig(small_params, 5.0, 40, seed=43)) != a


def test_events_lie_in_horizon(small_params):
    data = simulate_cluster(SimulationConfig(small_params, 3.0, 100, seed=1))
    for path in data:
        for ev in path.events:
            assert np.all((ev >= 0) & (ev < 3.0))


def test_cluster_mean_matches_stationary_rate():
    # mean count over [0, T) from the renewal equation, checked by quadrature of
    # E lambda(t) = mu + alpha beta int_0^t e^{-beta (t-s)} E lambda(s) ds
    mu, a, beta, T = 1.0, 0.5, 3.0, 5.0
    k = beta * (1 - a)
    mean_rate_integral = mu * (T / (1 - a) - a / (1 - a) * (1 - np.exp(-k * T)) / k)
    p = HawkesParams([mu], [[a]], beta)
    data = simulate_cluster(SimulationConfig(p, T, 20_000, seed=9))
    counts = np.array([path.counts()[0] for path in data])
    assert abs(counts.mean() - mean_rate_integral) < 4 * counts.std() / np.sqrt(counts.size)


def test_thinning_poisson_when_alpha_zero():
    p = HawkesParams([1.5, 0.5], np.zeros((2, 2)), 2.0)
    data = simulate_thinning_dataset(p, 4.0, 4000, seed=5)
    counts = np.array([path.counts() for path in data])
    for j, mu in enumerate([1.5, 0.5]):
        assert abs(counts[:, j].mean() - mu * 4.0) < 4 * np.sqrt(mu * 4.0 / 4000)


def test_thinning_seed_reproducible(small_params):
    assert simulate_thinning(small_params, 5.0, 7) == simulate_thinning(small_params, 5.0, 7)


def test_thinning_matches_cluster_ks():
    p = HawkesParams([1.0], [[0.5]], 3.0)
    a = simulate_cluster(SimulationConfig(p, 5.0, 3000, seed=1))
    b = simulate_thinning_dataset(p, 5.0, 3000, seed=2)
    ca = [x.counts().sum() for x in a]
    cb = [x.counts().sum() for x in b]
    assert stats.ks_2samp(ca, cb).pvalue > 0.01


def test_cluster_path_accepts_generator(small_params):
    path = cluster_path(small_params, 2.0, np.random.default_rng(0))
    assert path.dim == 2 and path.end_time == 2.0
