"""Domain types for exponential multivariate Hawkes processes.

The intensity of component ``j`` is

.. math::
    \\lambda_j(t) = \\mu_j + \\sum_{j'} \\alpha_{j,j'}
        \\sum_{t_{j',l} < t} \\beta e^{-\\beta (t - t_{j',l})}

with the sum running over strictly past events (left-limit convention).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class ValidationError(ValueError):
    """Raised when inputs violate a parameter-space or data invariant."""


def _frozen(a, ndim):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ValidationError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HawkesParams:
    """Parameters ``(mu, alpha, beta)`` of a d-dimensional exponential MHP.

    ``alpha[j, k]`` is the expected number of direct offspring in component
    ``j`` triggered by one event of component ``k``.
    """

    mu: np.ndarray
    alpha: np.ndarray
    beta: float

    def __post_init__(self):
        mu = _frozen(self.mu, 1)
        alpha = _frozen(self.alpha, 2)
        if alpha.shape != (mu.size, mu.size):
            raise ValidationError(
                f"alpha must have shape ({mu.size}, {mu.size}), got {alpha.shape}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self) -> int:
        return self.mu.size

    def spectral_radius(self) -> float:
        return spectral_radius(self.alpha)


@dataclass(frozen=True)
class Path:
    """One realization: ``d`` strictly increasing event sequences on ``[0, T)``."""

    events: tuple
    end_time: float

    def __post_init__(self):
        T = float(self.end_time)
        if not np.isfinite(T) or T <= 0:
            raise ValidationError(f"end_time must be positive and finite, got {self.end_time}")
        events = []
        for j, ev in enumerate(self.events):
            arr = np.array(ev, dtype=float).reshape(-1)
            if arr.size:
                if not np.all(np.isfinite(arr)):
                    raise ValidationError(f"dimension {j}: non-finite event time")
                if arr[0] < 0 or arr[-1] >= T:
                    raise ValidationError(
                        f"dimension {j}: event times must lie in [0, {T})")
                if np.any(np.diff(arr) <= 0):
                    raise ValidationError(
                        f"dimension {j}: event times must be strictly increasing")
            arr.setflags(write=False)
            events.append(arr)
        if not events:
            raise ValidationError("a path needs at least one dimension")
        object.__setattr__(self, "events", tuple(events))
        object.__setattr__(self, "end_time", T)

    @property
    def dim(self) -> int:
        return len(self.events)

    def counts(self) -> np.ndarray:
        return np.array([ev.size for ev in self.events], dtype=float)

    def __eq__(self, other):
        if not isinstance(other, Path):
            return NotImplemented
        return (self.end_time == other.end_time and self.dim == other.dim
                and all(np.array_equal(a, b) for a, b in zip(self.events, other.events)))

    def __hash__(self):
        return hash((self.end_time, tuple(ev.tobytes() for ev in self.events)))


@dataclass(frozen=True)
class Dataset:
    """``n`` independent paths sharing one horizon ``end_time``."""

    paths: tuple
    end_time: float

    def __post_init__(self):
        paths = tuple(p if isinstance(p, Path) else Path(p, self.end_time)
                      for p in self.paths)
        if not paths:
            raise ValidationError("a dataset needs at least one path")
        T = float(self.end_time)
        d = paths[0].dim
        for i, p in enumerate(paths):
            if p.end_time != T:
                raise ValidationError(f"path {i} has end_time {p.end_time}, expected {T}")
            if p.dim != d:
                raise ValidationError(f"path {i} has dimension {p.dim}, expected {d}")
        object.__setattr__(self, "paths", paths)
        object.__setattr__(self, "end_time", T)

    @classmethod
    def from_timestamps(cls, timestamps: Iterable[Sequence], end_time: float) -> "Dataset":
        """Build from nested lists ``[path][dim] -> times``."""
        return cls(tuple(Path(tuple(p), end_time) for p in timestamps), end_time)

    @property
    def n(self) -> int:
        return len(self.paths)

    @property
    def dim(self) -> int:
        return self.paths[0].dim

    def subset(self, index) -> "Dataset":
        return Dataset(tuple(self.paths[i] for i in index), self.end_time)

    def total_events(self) -> int:
        return int(sum(p.counts().sum() for p in self.paths))

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


@dataclass(frozen=True)
class ThetaEstimate:
    """Estimated baseline ``mu_hat`` (d,) and interactions ``alpha_hat`` (d, d)."""

    mu_hat: np.ndarray
    alpha_hat: np.ndarray

    def __post_init__(self):
        mu = _frozen(self.mu_hat, 1)
        alpha = _frozen(self.alpha_hat, 2)
        if alpha.shape != (mu.size, mu.size):
            raise ValidationError(
                f"alpha_hat must have shape ({mu.size}, {mu.size}), got {alpha.shape}")
        object.__setattr__(self, "mu_hat", mu)
        object.__setattr__(self, "alpha_hat", alpha)

    @property
    def dim(self) -> int:
        return self.mu_hat.size

    def to_matrix(self) -> np.ndarray:
        """Stack as a ``(d, d + 1)`` array: column 0 is ``mu``, the rest ``alpha``."""
        return np.column_stack([self.mu_hat, self.alpha_hat])

    @classmethod
    def from_matrix(cls, theta) -> "ThetaEstimate":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:, 0].copy(), theta[:, 1:].copy())

    def __eq__(self, other):
        if not isinstance(other, ThetaEstimate):
            return NotImplemented
        return (np.array_equal(self.mu_hat, other.mu_hat)
                and np.array_equal(self.alpha_hat, other.alpha_hat))

    __hash__ = None


def _check_index_and_time(params, path, j, t):
    if params.dim != path.dim:
        raise ValidationError(f"params dimension {params.dim} != path dimension {path.dim}")
    if not 0 <= j < params.dim:
        raise ValidationError(f"dimension index {j} out of range [0, {params.dim})")
    if not 0 <= t <= path.end_time:
        raise ValidationError(f"t={t} outside [0, {path.end_time}]")


def intensity(params: HawkesParams, path: Path, j: int, t: float) -> float:
    """Conditional intensity ``lambda_j(t)`` given events strictly before ``t``."""
    _check_index_and_time(params, path, j, t)
    beta = params.beta
    total = params.mu[j]
    for k, ev in enumerate(path.events):
        past = ev[ev < t]
        if past.size and params.alpha[j, k]:
            total += params.alpha[j, k] * beta * np.exp(-beta * (t - past)).sum()
    return float(total)


def compensator(params: HawkesParams, path: Path, j: int, t: float) -> float:
    """Integrated intensity ``int_0^t lambda_j(s) ds``."""
    _check_index_and_time(params, path, j, t)
    beta = params.beta
    total = params.mu[j] * t
    for k, ev in enumerate(path.events):
        past = ev[ev < t]
        if past.size and params.alpha[j, k]:
            total += params.alpha[j, k] * (1.0 - np.exp(-beta * (t - past))).sum()
    return float(total)


def spectral_radius(alpha, tol: float = 1e-10, max_iter: int = 1000) -> float:
    """Perron root of a non-negative square matrix by power iteration.

    Falls back to a dense eigensolver when the iteration has not settled
    within ``max_iter`` steps (periodic or reducible matrices whose dominant
    eigenvalues share a modulus).
    """
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"spectral radius needs a square matrix, got shape {a.shape}")
    if a.size == 0 or not np.any(a):
        return 0.0
    if np.any(a < 0):
        return float(np.max(np.abs(np.linalg.eigvals(a))))
    # Positive start vector keeps the iterate inside the Perron cone.
    x = np.ones(a.shape[0]) / a.shape[0]
    est = 0.0
    for _ in range(max_iter):
        y = a @ x
        norm = y.sum()
        if norm == 0.0:
            # Nilpotent direction; positive perturbation restarts the cone.
            return float(np.max(np.abs(np.linalg.eigvals(a))))
        new = norm / x.sum()
        x = y / norm
        if abs(new - est) <= tol * max(new, 1e-300):
            # Collatz-Wielandt bounds certify convergence on irreducible blocks.
            ratios = (a @ x)[x > 0] / x[x > 0]
            if ratios.max() - ratios.min() <= 1e-8 * max(new, 1e-300):
                return float(new)
        est = new
    return float(np.max(np.abs(np.linalg.eigvals(a))))


@dataclass
class ValidationReport:
    """Outcome of :func:`validate`. ``errors`` make the parameters unusable."""

    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    spectral_radius: float = float("nan")

    @property
    def valid(self) -> bool:
        return not self.errors

    @property
    def subcritical(self) -> bool:
        return bool(self.spectral_radius < 1.0)

    def raise_for_simulation(self):
        if self.errors:
            raise ValidationError("; ".join(self.errors))
        if not self.subcritical:
            raise ValidationError(
                f"spectral radius of alpha is {self.spectral_radius:.6g} >= 1; "
                "the process may not go extinct")


def validate(params: HawkesParams, allow_zero_mu: bool = False) -> ValidationReport:
    """Check positivity, non-negativity and sub-criticality of ``params``."""
    report = ValidationReport()
    mu, alpha, beta = params.mu, params.alpha, params.beta
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(alpha)) and np.isfinite(beta)):
        report.errors.append("parameters must be finite")
        return report
    if allow_zero_mu:
        if np.any(mu < 0):
            report.errors.append("mu must be non-negative")
    elif np.any(mu <= 0):
        report.errors.append("mu must be strictly positive")
    if np.any(alpha < 0):
        report.errors.append("alpha must be non-negative")
    if beta <= 0:
        report.errors.append("beta must be strictly positive")
    report.spectral_radius = spectral_radius(alpha)
    if report.spectral_radius >= 1.0:
        report.warnings.append(
            f"super-critical: spectral radius {report.spectral_radius:.6g} >= 1")
    return report
