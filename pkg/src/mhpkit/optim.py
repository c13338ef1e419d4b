"""Proximal first-order solvers and the parameter-free projected AdaGrad.

Objectives are any object with ``value(x)`` and ``grad(x)`` methods over
numpy arrays (least-squares objectives also expose ``lipschitz()``).
Bound constraints are given as an array ``lower`` broadcastable to ``x``;
the penalties are separable, so clipping the proximal point at ``lower`` is
the exact proximal map of penalty plus constraint.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError
from .model import DomainError

PENALTIES = ("none", "lasso", "ridge", "elasticnet")
OPTIMIZERS = ("gd", "agd")
SCHEDULERS = ("lipschitz", "backtracking")
MAX_HALVINGS = 60


class ConfigurationError(ValidationError):
    """Incompatible solver options."""


class OptimizationError(RuntimeError):
    """The solver could not make progress (step collapse, non-finite values)."""


@dataclass(frozen=True)
class ProxSpec:
    kind: str = "none"
    kappa: float = 0.0
    zeta: float = 0.5

    def __post_init__(self):
        if self.kind not in PENALTIES:
            raise ConfigurationError(f"unknown penalty {self.kind!r}; choose from {PENALTIES}")
        if not self.kappa >= 0:
            raise ConfigurationError(f"kappa must be non-negative, got {self.kappa}")
        if not 0 <= self.zeta <= 1:
            raise ConfigurationError(f"zeta must lie in [0, 1], got {self.zeta}")

    def with_kappa(self, kappa: float) -> "ProxSpec":
        return ProxSpec(self.kind, float(kappa), self.zeta)


def soft_threshold(v, threshold):
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def prox(spec: ProxSpec, v, step: float, mask=None):
    """Proximal map of ``step * kappa * Omega`` at ``v``.

    With a boolean ``mask`` only the selected coordinates are penalized;
    the others pass through unchanged.
    """
    v = np.asarray(v, dtype=float)
    k = step * spec.kappa
    if spec.kind == "none" or k == 0:
        return v.copy()
    if spec.kind == "lasso":
        out = soft_threshold(v, k)
    elif spec.kind == "ridge":
        out = v / (1.0 + 2.0 * k)
    else:
        out = soft_threshold(v, k * spec.zeta) / (1.0 + 2.0 * k * (1.0 - spec.zeta))
    return out if mask is None else np.where(mask, out, v)


def penalty_value(spec: ProxSpec, x, mask=None) -> float:
    if spec.kind == "none" or spec.kappa == 0:
        return 0.0
    x = np.asarray(x)
    if mask is not None:
        x = np.where(mask, x, 0.0)
    l1 = float(np.abs(x).sum())
    l2 = float(np.sum(x * x))
    if spec.kind == "lasso":
        return spec.kappa * l1
    if spec.kind == "ridge":
        return spec.kappa * l2
    return spec.kappa * (spec.zeta * l1 + (1.0 - spec.zeta) * l2)


@dataclass(frozen=True)
class OptimConfig:
    optimizer: str = "agd"
    scheduler: str = "backtracking"
    max_iter: int = 200
    tol: float = 1e-5
    record_every: int = 10
    print_every: int = 10
    verbose: bool = False

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(
                f"unknown optimizer {self.optimizer!r}; choose from {OPTIMIZERS}")
        if self.scheduler not in SCHEDULERS:
            raise ConfigurationError(
                f"unknown lr scheduler {self.scheduler!r}; choose from {SCHEDULERS}")
        if int(self.max_iter) < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if int(self.record_every) < 1 or int(self.print_every) < 1:
            raise ConfigurationError("record_every and print_every must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    loss: float
    objective: float
    tolerance: float


@dataclass
class OptimTrace:
    records: list = field(default_factory=list)
    status: str = "max_iter_reached"
    n_iter: int = 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective

    def format_table(self, every: int = 1) -> str:
        """Render ``Iteration | Loss | Tolerance`` as a grid table."""
        rows = [(str(r.iteration), f"{r.objective:.6g}", f"{r.tolerance:.6g}")
                for r in self.records if r.iteration % every == 0]
        header = ("Iteration", "Loss", "Tolerance")
        widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
                  for i, h in enumerate(header)]
        sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
        head_sep = sep.replace("-", "=")

        def line(cells):
            return "|" + "|".join(f" {c:>{w}} " for c, w in zip(cells, widths)) + "|"

        out = [sep, line(header), head_sep]
        for row in rows:
            out += [line(row), sep]
        return "\n".join(out)

    def summary(self) -> str:
        if self.converged:
            return f"Optimization completed. Convergence achieved after {self.n_iter} iterations."
        return f"Optimization completed. Maximum number of iterations ({self.n_iter}) reached."


def _relative_change(new, old):
    return abs(new - old) / max(1.0, abs(new))


def _project(x, lower):
    return x if lower is None else np.maximum(x, lower)


def minimize(objective, prox_spec: ProxSpec, config: OptimConfig, init, lower=None,
             penalty_mask=None):
    """Minimize ``objective + kappa * Omega`` by proximal GD (ISTA) or FISTA.

    Parameters
    ----------
    objective : object
        Provides ``value(x)``, ``grad(x)``; ``lipschitz()`` is required for
        the ``'lipschitz'`` scheduler.
    prox_spec : ProxSpec
        Penalty and its constant.
    config : OptimConfig
        Optimizer, step rule and stopping rule.
    init : ndarray
        Starting point (projected onto the constraint set first).
    lower : ndarray, optional
        Entrywise lower bounds; ``None`` means unconstrained.
    penalty_mask : ndarray of bool, optional
        Coordinates the penalty applies to; ``None`` penalizes all of them.

    Returns
    -------
    x : ndarray
        Final iterate.
    trace : OptimTrace
        Recorded objective values and termination status.
    """
    if config.scheduler == "lipschitz":
        if not getattr(objective, "smooth", True) or not hasattr(objective, "lipschitz"):
            raise ConfigurationError(
                "the 'lipschitz' scheduler needs an L-smooth loss (least-squares); "
                "use 'backtracking' for the log-likelihood")
        L = float(objective.lipschitz())
        fixed_step = 1.0 / L if L > 0 else 1.0
    else:
        fixed_step = None
    lower = None if lower is None else np.asarray(lower, dtype=float)

    x = _project(np.array(init, dtype=float), lower)
    try:
        fx = objective.value(x)
    except DomainError as exc:
        raise OptimizationError(f"objective undefined at the initial point: {exc}") from exc
    obj = fx + penalty_value(prox_spec, x, penalty_mask)
    trace = OptimTrace()
    accelerated = config.optimizer == "agd"
    y, t = x, 1.0
    fy = fx
    step = 1.0

    def prox_point(point, g, s):
        return _project(prox(prox_spec, point - s * g, s, penalty_mask), lower)

    for k in range(int(config.max_iter)):
        g = objective.grad(y)
        if not np.all(np.isfinite(g)):
            raise OptimizationError(f"non-finite gradient at iteration {k}")
        if fixed_step is not None:
            x_new = prox_point(y, g, fixed_step)
            f_new = objective.value(x_new)
        else:
            s = step * 2.0 if k else step
            for _ in range(MAX_HALVINGS):
                x_new = prox_point(y, g, s)
                try:
                    f_new = objective.value(x_new)
                except DomainError:
                    s *= 0.5
                    continue
                diff = x_new - y
                bound = fy + float(np.sum(g * diff)) + float(np.sum(diff * diff)) / (2.0 * s)
                if f_new <= bound + 1e-12 * max(1.0, abs(fy)):
                    break
                s *= 0.5
            else:
                raise OptimizationError(
                    f"line search failed after {MAX_HALVINGS} halvings at iteration {k}")
            step = s
        new_obj = f_new + penalty_value(prox_spec, x_new, penalty_mask)
        tolerance = _relative_change(new_obj, obj)
        if accelerated:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = _project(x_new + ((t - 1.0) / t_new) * (x_new - x), lower)
            t = t_new
            if fixed_step is None:
                try:
                    fy = objective.value(y)
                except DomainError:
                    # Extrapolated point left the domain: restart the momentum.
                    y, fy, t = x_new, f_new, 1.0
        else:
            y, fy = x_new, f_new
        x = x_new
        obj, fx = new_obj, f_new
        done = tolerance < config.tol
        if k % config.record_every == 0 or done or k == config.max_iter - 1:
            trace.records.append(TraceRecord(k, fx, obj, tolerance))
        if config.verbose and k % config.print_every == 0:
            print(f"iter {k:5d}  loss {obj:.6g}  tol {tolerance:.3g}", file=sys.stderr)
        if done:
            trace.status = "converged"
            trace.n_iter = k + 1
            break
    else:
        trace.n_iter = int(config.max_iter)
    return x, trace


def free_adagrad_minimize(objective, lower=None, gamma0: float = 0.1, max_iter: int = 500,
                          tol: float = 1e-6, init=None, mask=None):
    """Parameter-free projected AdaGrad (scalar-step version).

    With ``x0`` the projected start, ``S_t = sum_{s<=t} ||g_s||^2`` and a
    distance estimate ``r`` starting at ``gamma0``, each iteration does::

        x_{t+1} = P(x_t - r / sqrt(S_t) * g_t)
        if ||x_{t+1} - x0|| > r:  r <- 2 r

    ``P`` clips at ``lower`` and zeroes coordinates outside ``mask``. The
    best iterate seen is returned; the trace records the running best
    objective, so it is non-increasing. Stops when the relative change of
    the best objective over the last step falls below ``tol`` after it has
    improved at least once, or after ``max_iter`` iterations.
    """
    if not gamma0 > 0:
        raise ConfigurationError(f"gamma0 must be positive, got {gamma0}")
    lower = None if lower is None else np.asarray(lower, dtype=float)
    mask = None if mask is None else np.asarray(mask, dtype=bool)

    def project(z):
        z = _project(z, lower)
        return z if mask is None else np.where(mask, z, 0.0)

    x0 = project(np.array(init, dtype=float))
    x = x0
    radius = float(gamma0)
    sq_sum = 0.0
    best_x = x0
    best_f = objective.value(x0)
    if not np.isfinite(best_f):
        raise OptimizationError("objective is not finite at the initial point")
    trace = OptimTrace()
    trace.records.append(TraceRecord(0, best_f, best_f, float("nan")))
    for k in range(1, int(max_iter) + 1):
        g = objective.grad(x)
        if mask is not None:
            g = np.where(mask, g, 0.0)
        if not np.all(np.isfinite(g)):
            raise OptimizationError(f"non-finite gradient at iteration {k}")
        gn = float(np.sum(g * g))
        if gn == 0.0:
            trace.status = "converged"
            trace.n_iter = k
            break
        sq_sum += gn
        x = project(x - radius / math.sqrt(sq_sum) * g)
        if float(np.linalg.norm(x - x0)) > radius:
            radius *= 2.0
        f = objective.value(x)
        if not np.isfinite(f):
            raise OptimizationError(f"objective became non-finite at iteration {k}")
        if f < best_f:
            change = _relative_change(f, best_f)
            best_x, best_f = x, f
            trace.records.append(TraceRecord(k, f, f, change))
            if change < tol:
                trace.status = "converged"
                trace.n_iter = k
                break
    else:
        trace.n_iter = int(max_iter)
    return best_x, trace
