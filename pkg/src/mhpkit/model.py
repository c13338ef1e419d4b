"""Log-likelihood and least-squares losses with event-independent precomputation.

For a path with events drawn on ``[0, T)`` and decay ``beta`` define, for each
component ``k``, the excitation ``g_k(t) = sum_{t_{k,h} < t} beta exp(-beta (t - t_{k,h}))``.
Every loss quantity is an affine or quadratic function of ``theta = (mu, alpha)``
whose coefficients only involve:

* ``counts[j]``          number of events of component ``j``,
* ``integral[k]``        ``int_0^T g_k``,
* ``psi``                ``g_k`` evaluated at every event (strict past),
* ``gram[k, k']``        ``int_0^T g_k g_k'``,
* ``event_sum[j, k]``    ``sum_{l} g_k(t_{j,l})``.

Both losses use the parameter layout ``theta[j] = [mu_j, alpha_{j,0}, ..., alpha_{j,d-1}]``
(a ``(d, d + 1)`` array). Reported values are averaged over paths and divided
by ``T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, Path, ThetaEstimate, ValidationError

LOG_FLOOR = 1e-300


class DomainError(ArithmeticError):
    """Raised when the log-likelihood is evaluated where an intensity is not positive."""


def _path_statistics(path: Path, beta: float):
    """Single-pass recursion over the merged event stream of one path.

    Returns ``(counts, integral, integral_sq, psi_by_dim, cross, event_sum)``.
    ``cross[k, k']`` is ``sum_{h in k} (1 - exp(-2 beta (T - t_h))) g_k'(t_h)``.
    """
    T = path.end_time
    d = path.dim
    times = np.concatenate(path.events) if d else np.empty(0)
    dims = np.concatenate([np.full(ev.size, j) for j, ev in enumerate(path.events)])
    counts = path.counts()
    integral = np.zeros(d)
    integral_sq = np.zeros(d)
    cross = np.zeros((d, d))
    event_sum = np.zeros((d, d))
    psi_by_dim = [np.zeros((int(c), d)) for c in counts]
    if times.size == 0:
        return counts, integral, integral_sq, psi_by_dim, cross, event_sum

    order = np.lexsort((dims, times))
    times = times[order]
    dims = dims[order]
    m = times.size
    psi = np.zeros((m, d))
    state = np.zeros(d)
    last = times[0]
    pending = np.zeros(d)
    for i in range(m):
        t = times[i]
        if t > last:
            # Events sharing a timestamp must not excite each other.
            state = (state + pending) * np.exp(-beta * (t - last))
            pending[:] = 0.0
            last = t
        psi[i] = state
        pending[dims[i]] += beta
    left = T - times
    integral = np.bincount(dims, weights=1.0 - np.exp(-beta * left), minlength=d)
    decay2 = 1.0 - np.exp(-2.0 * beta * left)
    integral_sq = np.bincount(dims, weights=0.5 * beta * decay2, minlength=d)
    for j in range(d):
        sel = dims == j
        psi_by_dim[j] = psi[sel]
        event_sum[j] = psi[sel].sum(axis=0)
        cross[j] = (decay2[sel, None] * psi[sel]).sum(axis=0)
    return counts, integral, integral_sq, psi_by_dim, cross, event_sum


@dataclass(frozen=True)
class SufficientStats:
    """Per-path precomputed quantities for a dataset and a fixed decay.

    Arrays carry a leading path axis of length ``n`` except the per-event
    blocks: ``psi[j]`` stacks the excitation vectors at every event of
    component ``j`` across paths, and ``path_of_event[j]`` maps each row to
    its path index.
    """

    beta: float
    end_time: float
    counts: np.ndarray        # (n, d)
    integral: np.ndarray      # (n, d)
    integral_sq: np.ndarray   # (n, d)
    cross: np.ndarray         # (n, d, d), un-symmetrized
    gram: np.ndarray          # (n, d, d), symmetric int g_k g_k'
    event_sum: np.ndarray     # (n, d, d)
    psi: tuple                # d arrays of shape (N_j, d)
    path_of_event: tuple      # d int arrays of shape (N_j,)

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def dim(self) -> int:
        return self.counts.shape[1]

    def subset(self, index) -> "SufficientStats":
        """Statistics restricted to paths ``index`` (renumbered in order)."""
        index = np.asarray(index, dtype=int)
        remap = np.full(self.n, -1, dtype=int)
        remap[index] = np.arange(index.size)
        psi, owner = [], []
        for j in range(self.dim):
            new = remap[self.path_of_event[j]]
            keep = new >= 0
            rows = np.nonzero(keep)[0]
            rows = rows[np.argsort(new[keep], kind="stable")]
            psi.append(self.psi[j][rows])
            owner.append(np.sort(new[keep], kind="stable"))
        return SufficientStats(
            self.beta, self.end_time, self.counts[index], self.integral[index],
            self.integral_sq[index], self.cross[index], self.gram[index],
            self.event_sum[index], tuple(psi), tuple(owner))

    def quadratic(self):
        """Path-averaged ``(H, b)`` with ``R(theta) = (1/T) sum_j x_j' H x_j - 2 b_j' x_j``.

        ``H`` is ``(d + 1, d + 1)`` and ``b`` is ``(d, d + 1)``.
        """
        T = self.end_time
        d = self.dim
        H = np.empty((d + 1, d + 1))
        H[0, 0] = T
        H[0, 1:] = H[1:, 0] = self.integral.mean(axis=0)
        H[1:, 1:] = self.gram.mean(axis=0)
        b = np.column_stack([self.counts.mean(axis=0), self.event_sum.mean(axis=0)])
        return H, b


def precompute(dataset: Dataset, beta: float) -> SufficientStats:
    """Precompute loss statistics for every path in ``dataset``.

    Cost is linear in the number of events times ``d``.
    """
    if not beta > 0:
        raise ValidationError(f"beta must be positive, got {beta}")
    if not isinstance(dataset, Dataset) or dataset.n == 0:
        raise ValidationError("precompute needs a non-empty Dataset")
    d = dataset.dim
    n = dataset.n
    counts = np.zeros((n, d))
    integral = np.zeros((n, d))
    integral_sq = np.zeros((n, d))
    cross = np.zeros((n, d, d))
    event_sum = np.zeros((n, d, d))
    psi_parts = [[] for _ in range(d)]
    owner_parts = [[] for _ in range(d)]
    for i, path in enumerate(dataset.paths):
        c, I, I2, psi_j, W, V = _path_statistics(path, beta)
        counts[i], integral[i], integral_sq[i], cross[i], event_sum[i] = c, I, I2, W, V
        for j in range(d):
            psi_parts[j].append(psi_j[j])
            owner_parts[j].append(np.full(psi_j[j].shape[0], i, dtype=int))
    gram = 0.5 * (cross + cross.transpose(0, 2, 1))
    idx = np.arange(d)
    gram[:, idx, idx] += integral_sq
    psi = tuple(np.concatenate(p) if p else np.zeros((0, d)) for p in psi_parts)
    owner = tuple(np.concatenate(o) if o else np.zeros(0, dtype=int) for o in owner_parts)
    for arr in (counts, integral, integral_sq, cross, gram, event_sum, *psi, *owner):
        arr.setflags(write=False)
    return SufficientStats(float(beta), dataset.end_time, counts, integral, integral_sq,
                           cross, gram, event_sum, psi, owner)


def as_theta_matrix(theta, d: int) -> np.ndarray:
    if isinstance(theta, ThetaEstimate):
        theta = theta.to_matrix()
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (d, d + 1):
        raise ValidationError(f"theta must have shape ({d}, {d + 1}), got {theta.shape}")
    return theta


def _event_intensities(stats, theta, j):
    lam = theta[j, 0] + stats.psi[j] @ theta[j, 1:]
    bad = np.nonzero(~(lam > LOG_FLOOR))[0]
    if bad.size:
        row = bad[0]
        raise DomainError(
            f"non-positive intensity {lam[row]:.3g} at event {row} of dimension {j} "
            f"(path {stats.path_of_event[j][row]})")
    return lam


def loglik_path_values(stats: SufficientStats, theta, strict: bool = True) -> np.ndarray:
    """Unnormalized negative log-likelihood of each path, shape ``(n,)``.

    With ``strict=False`` a path holding an event with non-positive
    intensity gets ``+inf`` instead of raising :class:`DomainError`.
    """
    theta = as_theta_matrix(theta, stats.dim)
    T = stats.end_time
    values = T * theta[:, 0].sum() + (stats.integral @ theta[:, 1:].T).sum(axis=1)
    for j in range(stats.dim):
        if strict:
            log_lam = np.log(_event_intensities(stats, theta, j))
        else:
            lam = theta[j, 0] + stats.psi[j] @ theta[j, 1:]
            with np.errstate(divide="ignore", invalid="ignore"):
                log_lam = np.where(lam > LOG_FLOOR, np.log(np.maximum(lam, LOG_FLOOR)), -np.inf)
        values = values - np.bincount(stats.path_of_event[j], weights=log_lam,
                                      minlength=stats.n)
    return values


def loglik_total(stats: SufficientStats, theta) -> float:
    """Unnormalized negative log-likelihood summed over paths."""
    return float(loglik_path_values(stats, theta).sum())


def loglik_loss(stats: SufficientStats, theta) -> float:
    """Negative log-likelihood averaged over paths and divided by ``T``."""
    return loglik_total(stats, theta) / (stats.n * stats.end_time)


def loglik_grad(stats: SufficientStats, theta) -> np.ndarray:
    """Gradient of :func:`loglik_loss`, same ``(d, d + 1)`` layout as ``theta``."""
    theta = as_theta_matrix(theta, stats.dim)
    n, T = stats.n, stats.end_time
    grad = np.empty_like(theta)
    integral_total = stats.integral.sum(axis=0)
    for j in range(stats.dim):
        lam = _event_intensities(stats, theta, j)
        inv = 1.0 / lam
        grad[j, 0] = n * T - inv.sum()
        grad[j, 1:] = integral_total - inv @ stats.psi[j]
    return grad / (n * T)


def loglik_path_grads(stats: SufficientStats, theta, weights) -> np.ndarray:
    """``sum_i weights[i] * grad NLL_i(theta)`` for unnormalized per-path NLLs."""
    theta = as_theta_matrix(theta, stats.dim)
    weights = np.asarray(weights, dtype=float)
    T = stats.end_time
    grad = np.empty_like(theta)
    wI = weights @ stats.integral
    wsum = weights.sum()
    for j in range(stats.dim):
        lam = _event_intensities(stats, theta, j)
        w_ev = weights[stats.path_of_event[j]] / lam
        grad[j, 0] = wsum * T - w_ev.sum()
        grad[j, 1:] = wI - w_ev @ stats.psi[j]
    return grad


def ls_loss(stats: SufficientStats, theta) -> float:
    """Least-squares contrast averaged over paths and divided by ``T``.

    Evaluated from the path-averaged quadratic form only; no event loop.
    """
    theta = as_theta_matrix(theta, stats.dim)
    H, b = stats.quadratic()
    quad = np.einsum("ja,ab,jb->", theta, H, theta)
    return float((quad - 2.0 * np.sum(b * theta)) / stats.end_time)


def ls_grad(stats: SufficientStats, theta) -> np.ndarray:
    """Gradient ``(2/T)(theta H - b)`` of :func:`ls_loss`."""
    theta = as_theta_matrix(theta, stats.dim)
    H, b = stats.quadratic()
    return 2.0 * (theta @ H - b) / stats.end_time


def ls_hessian(stats: SufficientStats) -> np.ndarray:
    """Hessian of :func:`ls_loss` acting on the flattened ``theta`` (row-major).

    The form is block diagonal with the same ``(2/T) H`` block for every row.
    """
    H, _ = stats.quadratic()
    return np.kron(np.eye(stats.dim), 2.0 * H / stats.end_time)


def ls_lipschitz(stats: SufficientStats) -> float:
    """Largest eigenvalue of the least-squares Hessian."""
    H, _ = stats.quadratic()
    return float(2.0 * np.linalg.eigvalsh(H)[-1] / stats.end_time)


class LogLikelihood:
    """Objective wrapper exposing ``value`` and ``grad`` for the solvers."""

    name = "log-likelihood"
    smooth = False

    def __init__(self, stats: SufficientStats):
        self.stats = stats

    def value(self, theta):
        return loglik_loss(self.stats, theta)

    def grad(self, theta):
        return loglik_grad(self.stats, theta)


class LeastSquares:
    """Least-squares objective; precomputes its quadratic form once."""

    name = "least-squares"
    smooth = True

    def __init__(self, stats: SufficientStats):
        self.stats = stats
        self._H, self._b = stats.quadratic()
        self._T = stats.end_time

    def value(self, theta):
        quad = np.einsum("ja,ab,jb->", theta, self._H, theta)
        return float((quad - 2.0 * np.sum(self._b * theta)) / self._T)

    def grad(self, theta):
        return 2.0 * (theta @ self._H - self._b) / self._T

    def lipschitz(self):
        return float(2.0 * np.linalg.eigvalsh(self._H)[-1] / self._T)


LOSSES = {"log-likelihood": LogLikelihood, "least-squares": LeastSquares}


def make_objective(loss: str, stats: SufficientStats):
    try:
        return LOSSES[loss](stats)
    except KeyError:
        raise ValidationError(
            f"unknown loss {loss!r}; choose from {sorted(LOSSES)}") from None
