"""Penalty constant selection over a decreasing grid: K-fold CV, BIC and EBIC."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Dataset, ValidationError
from .model import SufficientStats, loglik_total, make_objective, precompute

METHODS = ("cv", "bic", "ebic")
MU_FLOOR = 1e-8


@dataclass(frozen=True)
class KappaGrid:
    values: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValidationError("kappa grid is empty")
        if any(not v > 0 for v in values):
            raise ValidationError("kappa grid values must be positive")
        if any(b >= a for a, b in zip(values, values[1:])):
            raise ValidationError("kappa grid must be strictly decreasing")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class CalibrationChoice:
    method: str = "ebic"
    folds: int = 5
    gamma: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown kappa choice {self.method!r}; choose from {METHODS}")
        if self.method == "cv" and int(self.folds) < 2:
            raise ValidationError(f"cv needs at least 2 folds, got {self.folds}")
        if not 0 <= self.gamma <= 1:
            raise ValidationError(f"ebic gamma must lie in [0, 1], got {self.gamma}")

    @property
    def effective_gamma(self) -> float:
        return 0.0 if self.method == "bic" else float(self.gamma)


def _as_stats(data, beta) -> SufficientStats:
    if isinstance(data, SufficientStats):
        return data
    if isinstance(data, Dataset):
        return precompute(data, beta)
    raise ValidationError(f"expected a Dataset or SufficientStats, got {type(data).__name__}")


def _zero_alpha_mu(stats: SufficientStats, loss: str, kappa: float) -> np.ndarray:
    """Per-dimension optimal baseline when ``alpha = 0`` under an l1 penalty ``kappa``."""
    rate = stats.counts.mean(axis=0) / stats.end_time
    if kappa == 0:
        return np.maximum(rate, MU_FLOOR)
    if loss == "least-squares":
        mu = rate - 0.5 * kappa
    else:
        mu = rate / (1.0 + kappa)
    return np.maximum(mu, MU_FLOOR)


def kappa_max(stats: SufficientStats, loss: str = "least-squares",
              penalize_mu: bool = False) -> float:
    """Smallest lasso constant whose non-negative solution has ``alpha = 0``.

    The zero-interaction optimality condition ``grad_alpha + kappa >= 0`` is
    evaluated at the optimal baseline. When the baseline is penalized too,
    that baseline depends on ``kappa`` and the fixed point is reached by
    monotone iteration.
    """
    if stats.n == 0 or not np.any(stats.counts):
        raise ValidationError("cannot build a kappa grid from data without events")
    objective = make_objective(loss, stats)
    d = stats.dim

    def needed(kappa):
        theta = np.zeros((d, d + 1))
        theta[:, 0] = _zero_alpha_mu(stats, loss, kappa)
        return float(np.max(-objective.grad(theta)[:, 1:]))

    kappa = max(needed(0.0), 1e-8)
    if not penalize_mu:
        return kappa
    for _ in range(500):
        new = max(kappa, needed(kappa))
        if new - kappa <= 1e-13 * new:
            break
        kappa = new
    return kappa


def default_grid(stats: SufficientStats, size: int = 20, loss: str = "least-squares",
                 ratio: float = 1e-4, penalize_mu: bool = False) -> KappaGrid:
    """Log-spaced grid from :func:`kappa_max` down to ``ratio * kappa_max``."""
    if int(size) < 2:
        raise ValidationError(f"grid size must be >= 2, got {size}")
    top = kappa_max(stats, loss, penalize_mu)
    values = np.geomspace(top, top * ratio, int(size))
    values[0], values[-1] = top, top * ratio
    return KappaGrid(tuple(values))


def _coerce_grid(grid):
    return grid if isinstance(grid, KappaGrid) else KappaGrid(tuple(grid))


def _argmin_prefer_larger(values):
    # The grid is decreasing, so the first minimizer is the largest kappa.
    return int(np.argmin(np.asarray(values)))


def _map(fn, items, n_jobs):
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def fold_indices(n: int, folds: int, seed=None):
    """Split ``range(n)`` into ``folds`` disjoint groups after a seeded shuffle."""
    if folds > n:
        raise ValidationError(f"cannot split {n} paths into {folds} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def select_cv(data, fit_config, grid, folds: int = 5, seed=None, n_jobs: int = 1):
    """K-fold cross-validated choice of ``kappa``.

    Returns
    -------
    best : float
    mean_losses : ndarray
        Mean held-out unpenalized loss for each grid value, in grid order.
    """
    from .learner import solve

    grid = _coerce_grid(grid)
    stats = _as_stats(data, fit_config.decay)
    groups = fold_indices(stats.n, int(folds), seed)
    splits = []
    for k, held in enumerate(groups):
        train = np.sort(np.concatenate([g for i, g in enumerate(groups) if i != k]))
        splits.append((stats.subset(train), stats.subset(held)))

    def evaluate(kappa):
        losses = []
        for train, held in splits:
            theta, _ = solve(train, fit_config, kappa)
            losses.append(make_objective(fit_config.loss, held).value(theta))
        return float(np.mean(losses))

    mean_losses = np.array(_map(evaluate, grid.values, n_jobs))
    return grid.values[_argmin_prefer_larger(mean_losses)], mean_losses


def ebic_criterion(stats: SufficientStats, theta, gamma: float) -> float:
    """``2 NLL + |S| log n + 2 gamma log C(d^2, |S_alpha|)``.

    ``NLL`` is the unnormalized negative log-likelihood summed over paths,
    ``|S|`` counts every exact non-zero of ``theta`` and ``|S_alpha|`` the
    non-zero interaction coefficients.
    """
    theta = np.asarray(theta)
    d = stats.dim
    support = int(np.count_nonzero(theta))
    support_alpha = int(np.count_nonzero(theta[:, 1:]))
    m = d * d
    log_binom = (math.lgamma(m + 1) - math.lgamma(support_alpha + 1)
                 - math.lgamma(m - support_alpha + 1))
    return (2.0 * loglik_total(stats, theta) + support * math.log(stats.n)
            + 2.0 * gamma * log_binom)


def select_ebic(data, fit_config, grid, gamma: float = 1.0, n_jobs: int = 1):
    """(E)BIC choice of ``kappa``; ``gamma = 0`` is plain BIC.

    Returns ``(best, criteria)`` with one criterion value per grid entry.
    """
    from .learner import solve

    if not 0 <= gamma <= 1:
        raise ValidationError(f"ebic gamma must lie in [0, 1], got {gamma}")
    grid = _coerce_grid(grid)
    stats = _as_stats(data, fit_config.decay)

    def evaluate(kappa):
        theta, _ = solve(stats, fit_config, kappa)
        return ebic_criterion(stats, theta, gamma)

    criteria = np.array(_map(evaluate, grid.values, n_jobs))
    return grid.values[_argmin_prefer_larger(criteria)], criteria


def select_kappa(stats: SufficientStats, fit_config, choice: CalibrationChoice,
                 grid=None, n_jobs: int = 1):
    """Dispatch to the configured calibration; builds the default grid if needed."""
    if grid is None:
        grid = default_grid(stats, fit_config.grid_size, fit_config.loss,
                            penalize_mu=fit_config.penalize_mu)
    if choice.method == "cv":
        return select_cv(stats, fit_config, grid, choice.folds, fit_config.seed, n_jobs)
    return select_ebic(stats, fit_config, grid, choice.effective_gamma, n_jobs)
