"""Penalized inference of exponential MHP parameters from repeated paths."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .calibrate import MU_FLOOR, CalibrationChoice, KappaGrid, default_grid, select_kappa
from .core import Dataset, ThetaEstimate, ValidationError
from .model import LOSSES, SufficientStats, make_objective, precompute
from .optim import ConfigurationError, OptimConfig, OptimTrace, ProxSpec, minimize


@dataclass(frozen=True)
class FitConfig:
    """Learner options.

    ``kappa`` fixes the penalty constant; when it is ``None`` and a penalty
    is set, ``kappa_choice`` selects it over a grid (``grid`` or the
    default grid of ``grid_size`` values).
    """

    decay: float
    loss: str = "least-squares"
    penalty: str = "none"
    kappa: Optional[float] = None
    kappa_choice: CalibrationChoice = field(default_factory=CalibrationChoice)
    zeta: float = 0.5
    optim: OptimConfig = field(default_factory=OptimConfig)
    grid: Optional[tuple] = None
    grid_size: int = 20
    positive: bool = True
    penalize_mu: bool = False
    seed: Optional[int] = 0
    n_jobs: int = 1

    def __post_init__(self):
        if not self.decay > 0:
            raise ConfigurationError(f"decay must be positive, got {self.decay}")
        if self.loss not in LOSSES:
            raise ConfigurationError(f"unknown loss {self.loss!r}; choose from {sorted(LOSSES)}")
        ProxSpec(self.penalty, 0.0 if self.kappa is None else self.kappa, self.zeta)
        if self.optim.scheduler == "lipschitz" and self.loss != "least-squares":
            raise ConfigurationError(
                "the 'lipschitz' scheduler requires the least-squares loss; "
                "the log-likelihood gradient is not Lipschitz")

    def prox_spec(self, kappa: float) -> ProxSpec:
        if self.penalty == "none":
            return ProxSpec("none")
        return ProxSpec(self.penalty, float(kappa), self.zeta)


@dataclass(frozen=True)
class FitResult:
    theta_hat: ThetaEstimate
    selected_kappa: float
    trace: OptimTrace
    config: FitConfig
    n_paths: int
    dim: int
    end_time: float
    calibration: Optional[dict] = None

    @property
    def estimated_params(self) -> np.ndarray:
        """``(d, d + 1)`` array ``[mu | alpha]``."""
        return self.theta_hat.to_matrix()

    @property
    def converged(self) -> bool:
        return self.trace.converged


def initial_theta(stats: SufficientStats) -> np.ndarray:
    """Half the per-dimension Poisson rate for ``mu`` and zero interactions."""
    d = stats.dim
    theta = np.zeros((d, d + 1))
    theta[:, 0] = np.maximum(stats.counts.mean(axis=0) / (2.0 * stats.end_time), MU_FLOOR)
    return theta


def lower_bounds(d: int) -> np.ndarray:
    lower = np.zeros((d, d + 1))
    lower[:, 0] = MU_FLOOR
    return lower


def penalty_mask(d: int) -> np.ndarray:
    """Penalize interactions only; baselines stay unpenalized."""
    mask = np.ones((d, d + 1), dtype=bool)
    mask[:, 0] = False
    return mask


def solve(stats: SufficientStats, config: FitConfig, kappa: float = 0.0, init=None):
    """Solve the penalized problem at a fixed ``kappa``; returns ``(theta, trace)``."""
    objective = make_objective(config.loss, stats)
    if init is None:
        init = initial_theta(stats)
    lower = lower_bounds(stats.dim) if config.positive else None
    mask = None if config.penalize_mu else penalty_mask(stats.dim)
    return minimize(objective, config.prox_spec(kappa), config.optim, init, lower, mask)


def fit(dataset: Dataset, config: FitConfig, stats: Optional[SufficientStats] = None) -> FitResult:
    """Fit ``theta = (mu, alpha)`` to ``dataset`` with the options in ``config``."""
    if stats is None:
        stats = precompute(dataset, config.decay)
    calibration = None
    if config.penalty == "none":
        kappa = 0.0
    elif config.kappa is not None:
        kappa = float(config.kappa)
    else:
        if config.grid is not None:
            grid = KappaGrid(config.grid)
        else:
            grid = default_grid(stats, config.grid_size, config.loss,
                                penalize_mu=config.penalize_mu)
        kappa, values = select_kappa(stats, config, config.kappa_choice, grid, config.n_jobs)
        calibration = {"method": config.kappa_choice.method,
                       "kappas": list(grid.values), "values": [float(v) for v in values]}
    theta, trace = solve(stats, config, kappa)
    if config.optim.verbose:
        print(trace.summary(), file=sys.stderr)
        print(trace.format_table(config.optim.print_every), file=sys.stderr)
    return FitResult(ThetaEstimate.from_matrix(theta), float(kappa), trace, config,
                     stats.n, stats.dim, stats.end_time, calibration)


def score(result: FitResult, dataset: Dataset) -> float:
    """Unpenalized configured loss of the fitted parameters on ``dataset``."""
    if dataset.dim != result.dim:
        raise ValidationError(f"dataset dimension {dataset.dim} != model dimension {result.dim}")
    stats = precompute(dataset, result.config.decay)
    return make_objective(result.config.loss, stats).value(result.estimated_params)


def estimated_support(result: FitResult, threshold: float = 0.0) -> np.ndarray:
    """Boolean ``(d, d)`` matrix of interactions strictly above ``threshold``."""
    return result.theta_hat.alpha_hat > threshold


def estimated_values(result: FitResult) -> dict:
    """Heatmap-ready arrays behind the estimated-values figure."""
    return {"mu": result.theta_hat.mu_hat.copy(), "alpha": result.theta_hat.alpha_hat.copy()}


class HawkesLearner:
    """Estimator-style facade over :func:`fit` with string options.

    >>> learner = HawkesLearner(decay=3.0, loss="least-squares", penalty="lasso",
    ...                         kappa_choice="ebic", gamma=1.0)  # doctest: +SKIP
    >>> learner.fit(timestamps, end_time=5.0)                     # doctest: +SKIP
    """

    def __init__(self, decay, loss="least-squares", penalty="none", kappa=None,
                 kappa_choice="ebic", cv=5, gamma=1.0, zeta=0.5, optimizer="agd",
                 lr_scheduler="backtracking", max_iter=200, tol=1e-5, verbose=False,
                 print_every=10, record_every=10, grid=None, grid_size=20, penalize_mu=False, seed=0,
                 n_jobs=1):
        optim = OptimConfig(optimizer, lr_scheduler, max_iter, tol, record_every,
                            print_every, verbose)
        choice = CalibrationChoice(kappa_choice, cv if kappa_choice == "cv" else 5, gamma)
        self.config = FitConfig(decay, loss, penalty, kappa, choice, zeta, optim,
                                None if grid is None else tuple(grid), grid_size, True,
                                penalize_mu, seed, n_jobs)
        self.result_: Optional[FitResult] = None

    @staticmethod
    def _dataset(data, end_time):
        if isinstance(data, Dataset):
            return data
        if end_time is None:
            raise ValidationError("end_time is required with raw timestamps")
        return Dataset.from_timestamps(data, end_time)

    def fit(self, data, end_time=None):
        self.result_ = fit(self._dataset(data, end_time), self.config)
        return self

    def _fitted(self) -> FitResult:
        if self.result_ is None:
            raise ValidationError("the learner is not fitted yet")
        return self.result_

    def score(self, data, end_time=None) -> float:
        return score(self._fitted(), self._dataset(data, end_time))

    @property
    def estimated_params(self) -> np.ndarray:
        return self._fitted().estimated_params

    def estimated_support(self, threshold=0.0):
        return estimated_support(self._fitted(), threshold)

    def with_options(self, **changes) -> "HawkesLearner":
        new = object.__new__(HawkesLearner)
        new.config = replace(self.config, **changes)
        new.result_ = None
        return new
