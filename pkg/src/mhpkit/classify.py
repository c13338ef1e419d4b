"""K-class classification of MHP paths by empirical L2-risk minimization.

The score of class ``k`` on a path is ``f_k = 2 pi_k - 1`` where ``pi`` is
the posterior ``softmax_k(log p_k + loglik_k(path))``. Classifiers minimize
the empirical risk ``mean_i sum_k (Z_ik - f_ik)^2`` with ``Z_ik = +-1``
coding the label. ``fit_erm`` optimizes every coordinate; ``fit_ermlr``
first selects a per-class support with lasso + EBIC and refits on it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .calibrate import CalibrationChoice
from .core import Dataset, HawkesParams, Path, ThetaEstimate, ValidationError, validate
from .learner import FitConfig, fit, lower_bounds
from .model import SufficientStats, loglik_path_grads, loglik_path_values, precompute
from .optim import OptimConfig, OptimTrace, free_adagrad_minimize
from .simulate import _sample_streams, cluster_path

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class ClassBank:
    """Per-class parameters sharing one decay, with class weights."""

    params: tuple
    weights: np.ndarray

    def __post_init__(self):
        params = tuple(self.params)
        if not params:
            raise ValidationError("a class bank needs at least one class")
        if any(not isinstance(p, HawkesParams) for p in params):
            raise ValidationError("class parameters must be HawkesParams")
        beta, d = params[0].beta, params[0].dim
        for k, p in enumerate(params):
            if p.beta != beta:
                raise ValidationError(f"class {k} decay {p.beta} differs from {beta}")
            if p.dim != d:
                raise ValidationError(f"class {k} dimension {p.dim} differs from {d}")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size != len(params):
            raise ValidationError(f"{w.size} weights for {len(params)} classes")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("class weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"class weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "weights", w)

    @property
    def n_classes(self) -> int:
        return len(self.params)

    @property
    def dim(self) -> int:
        return self.params[0].dim

    @property
    def beta(self) -> float:
        return self.params[0].beta


@dataclass(frozen=True)
class LabeledDataset:
    data: Dataset
    labels: np.ndarray
    n_classes: Optional[int] = None

    def __post_init__(self):
        labels = np.array(self.labels).reshape(-1)
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise ValidationError("labels must be integers")
        labels = labels.astype(np.int64)
        if labels.size != self.data.n:
            raise ValidationError(f"{labels.size} labels for {self.data.n} paths")
        k = int(labels.max()) + 1 if labels.size else 0
        n_classes = k if self.n_classes is None else int(self.n_classes)
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise ValidationError(f"labels must lie in [0, {n_classes})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n_classes", n_classes)

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def dim(self) -> int:
        return self.data.dim

    @property
    def end_time(self) -> float:
        return self.data.end_time

    def subset(self, index) -> "LabeledDataset":
        index = np.asarray(index)
        return LabeledDataset(self.data.subset(index), self.labels[index], self.n_classes)


@dataclass(frozen=True)
class ClassifierModel:
    p_hat: np.ndarray
    theta_hat: tuple
    beta: float
    supports: Optional[tuple] = None
    method: str = "erm"
    trace: Optional[OptimTrace] = field(default=None, compare=False)

    def __post_init__(self):
        p = np.array(self.p_hat, dtype=float).reshape(-1)
        if abs(p.sum() - 1.0) > WEIGHT_TOL or np.any(p < 0):
            raise ValidationError("p_hat must be a probability vector")
        thetas = tuple(self.theta_hat)
        if len(thetas) != p.size:
            raise ValidationError(f"{len(thetas)} class estimates for {p.size} weights")
        for k, th in enumerate(thetas):
            if np.any(th.mu_hat <= 0) or np.any(th.alpha_hat < 0):
                raise ValidationError(f"class {k} estimate is infeasible (need mu > 0, alpha >= 0)")
        p.setflags(write=False)
        object.__setattr__(self, "p_hat", p)
        object.__setattr__(self, "theta_hat", thetas)

    @property
    def n_classes(self) -> int:
        return self.p_hat.size

    @property
    def dim(self) -> int:
        return self.theta_hat[0].mu_hat.size

    def stacked(self) -> np.ndarray:
        """``(K, d, d + 1)`` array of ``[mu | alpha]`` blocks."""
        return np.stack([th.to_matrix() for th in self.theta_hat])


def make_classification(bank: ClassBank, n_samples: int, end_time: float,
                        seed=None) -> LabeledDataset:
    """Draw i.i.d. labels from the bank weights, then one path per label."""
    for k, p in enumerate(bank.params):
        report = validate(p)
        if not report.valid or not report.subcritical:
            raise ValidationError(f"class {k}: " + "; ".join(report.errors or ["not sub-critical"]))
    n = int(n_samples)
    if n < 1:
        raise ValidationError(f"n_samples must be >= 1, got {n_samples}")
    if not end_time > 0:
        raise ValidationError(f"end_time must be positive, got {end_time}")
    label_seq, path_seq = np.random.SeedSequence(seed).spawn(2)
    labels = np.random.default_rng(label_seq).choice(bank.n_classes, size=n, p=bank.weights)
    streams = _sample_streams(path_seq, n)
    paths = tuple(cluster_path(bank.params[y], end_time, rng) for y, rng in zip(labels, streams))
    return LabeledDataset(Dataset(paths, float(end_time)), labels, bank.n_classes)


def _class_logliks(stats: SufficientStats, thetas) -> np.ndarray:
    """``(n, K)`` path log-likelihoods; ``-inf`` where a class has a non-positive intensity."""
    return np.column_stack([-loglik_path_values(stats, th, strict=False) for th in thetas])


def _posterior(prior, logliks) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logits = np.log(np.asarray(prior, dtype=float)) + logliks
    top = np.max(logits, axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise ValidationError("every class has zero likelihood on some path")
    w = np.exp(logits - top)
    return w / w.sum(axis=1, keepdims=True)


def _as_stats(model_dim, beta, paths, end_time=None) -> SufficientStats:
    if isinstance(paths, SufficientStats):
        stats = paths
    else:
        if isinstance(paths, LabeledDataset):
            paths = paths.data
        if isinstance(paths, Path):
            paths = Dataset((paths,), paths.end_time)
        elif not isinstance(paths, Dataset):
            paths = tuple(paths)
            if end_time is None:
                end_time = paths[0].end_time if paths else None
            if end_time is None:
                raise ValidationError("end_time is required")
            paths = Dataset(paths, float(end_time))
        stats = precompute(paths, beta)
    if stats.dim != model_dim:
        raise ValidationError(f"data dimension {stats.dim} != model dimension {model_dim}")
    return stats


def predict_proba(model: ClassifierModel, paths, end_time=None) -> np.ndarray:
    """``(n, K)`` posterior class probabilities."""
    stats = _as_stats(model.dim, model.beta, paths, end_time)
    return _posterior(model.p_hat, _class_logliks(stats, model.theta_hat))


def score_function(model: ClassifierModel, path) -> np.ndarray:
    """Scores ``f_k = 2 pi_k - 1`` in ``[-1, 1]``; one row per path for several paths."""
    f = 2.0 * predict_proba(model, path) - 1.0
    return f[0] if isinstance(path, Path) else f


def label_coding(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValidationError(f"labels must lie in [0, {n_classes})")
    z = -np.ones((labels.size, n_classes))
    z[np.arange(labels.size), labels] = 1.0
    return z


def l2_risk_from_scores(z, f) -> float:
    z = np.asarray(z, dtype=float)
    return float(np.sum((z - np.asarray(f, dtype=float)) ** 2) / z.shape[0])


def empirical_l2_risk(model: ClassifierModel, data: LabeledDataset) -> float:
    """Mean over paths of ``sum_k (Z_k - f_k)^2``; lies in ``[0, 4K]``."""
    if data.n_classes > model.n_classes:
        raise ValidationError(f"labels reach class {data.n_classes - 1}, model has {model.n_classes}")
    z = label_coding(data.labels, model.n_classes)
    return l2_risk_from_scores(z, score_function(model, data.data))


class L2Risk:
    """Empirical L2-risk as a function of the stacked ``(K, d, d + 1)`` parameters."""

    smooth = False

    def __init__(self, stats: SufficientStats, labels, p_hat):
        self.stats = stats
        self.p_hat = np.asarray(p_hat, dtype=float)
        self.z = label_coding(labels, self.p_hat.size)

    def _pi(self, x):
        logliks = _class_logliks(self.stats, list(x))
        return _posterior(self.p_hat, logliks)

    def value(self, x) -> float:
        try:
            pi = self._pi(x)
        except ValidationError:
            return float("inf")
        return l2_risk_from_scores(self.z, 2.0 * pi - 1.0)

    def grad(self, x) -> np.ndarray:
        pi = self._pi(x)
        n = self.stats.n
        c = -4.0 * (self.z - (2.0 * pi - 1.0)) / n  # dR / dpi
        dl = pi * (c - np.sum(pi * c, axis=1, keepdims=True))  # dR / dloglik
        # loglik = -NLL, so dR/dtheta_k = sum_i (-dl_ik) grad NLL_ik
        return np.stack([loglik_path_grads(self.stats, x[k], -dl[:, k])
                         for k in range(x.shape[0])])


def _class_frequencies(train: LabeledDataset) -> np.ndarray:
    counts = np.bincount(train.labels, minlength=train.n_classes).astype(float)
    if train.n_classes < 1 or np.any(counts == 0):
        missing = np.flatnonzero(counts == 0).tolist()
        raise ValidationError(f"classes {missing} have no training paths")
    return counts / counts.sum()


def _map(fn, items, n_jobs):
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _per_class_fits(train, stats, config, n_jobs):
    def one(k):
        idx = np.flatnonzero(train.labels == k)
        return fit(train.data.subset(idx), config, stats.subset(idx))
    return _map(one, range(train.n_classes), n_jobs)


def _refit(stats, train, p_hat, init, mask, gamma0, max_iter, tol):
    risk = L2Risk(stats, train.labels, p_hat)
    K, d = init.shape[0], stats.dim
    lower = np.broadcast_to(lower_bounds(d), (K, d, d + 1))
    x, trace = free_adagrad_minimize(risk, lower, gamma0, max_iter, tol, init, mask)
    if not np.isfinite(trace.final_objective):
        raise ValidationError("empirical risk is not finite")
    return x, trace


def _model(p_hat, x, beta, supports, method, trace):
    thetas = tuple(ThetaEstimate.from_matrix(x[k]) for k in range(x.shape[0]))
    return ClassifierModel(p_hat, thetas, float(beta), supports, method, trace)


def fit_erm(train: LabeledDataset, beta: float, gamma0: float = 0.1, max_iter: int = 300,
            tol: float = 1e-6, n_jobs: int = 1) -> ClassifierModel:
    """Risk minimization over all coordinates, warm-started from per-class fits."""
    p_hat = _class_frequencies(train)
    stats = precompute(train.data, beta)
    base = FitConfig(beta, "least-squares", "none",
                     optim=OptimConfig("agd", "backtracking", 500, 1e-8))
    fits = _per_class_fits(train, stats, base, n_jobs)
    init = np.stack([f.estimated_params for f in fits])
    x, trace = _refit(stats, train, p_hat, init, None, gamma0, max_iter, tol)
    return _model(p_hat, x, beta, None, "erm", trace)


def fit_ermlr(train: LabeledDataset, beta: float, gamma0: float = 0.1, ebic_gamma: float = 1.0,
              max_iter: int = 300, tol: float = 1e-6, grid_size: int = 20,
              n_jobs: int = 1) -> ClassifierModel:
    """Per-class lasso + EBIC support selection, then a risk refit on the supports."""
    p_hat = _class_frequencies(train)
    stats = precompute(train.data, beta)
    lasso = FitConfig(beta, "least-squares", "lasso",
                      kappa_choice=CalibrationChoice("ebic", gamma=ebic_gamma),
                      optim=OptimConfig("agd", "backtracking", 500, 1e-8), grid_size=grid_size)
    fits = _per_class_fits(train, stats, lasso, n_jobs)
    init = np.stack([f.estimated_params for f in fits])
    supports = tuple(init[k, :, 1:] != 0 for k in range(init.shape[0]))
    mask = np.ones_like(init, dtype=bool)
    for k, s in enumerate(supports):
        mask[k, :, 1:] = s
    x, trace = _refit(stats, train, p_hat, init, mask, gamma0, max_iter, tol)
    return _model(p_hat, x, beta, supports, "ermlr", trace)


def predict(model: ClassifierModel, paths, end_time=None) -> np.ndarray:
    """Arg-max class of the scores; ``np.argmax`` keeps the smallest index on ties."""
    return np.argmax(predict_proba(model, paths, end_time), axis=1)


def accuracy(model: ClassifierModel, data: LabeledDataset) -> float:
    if data.n == 0:
        raise ValidationError("accuracy of an empty dataset is undefined")
    return float(np.mean(predict(model, data.data) == data.labels))


def confusion(model: ClassifierModel, data: LabeledDataset) -> np.ndarray:
    """Row-normalized ``K x K`` matrix; row = true class, column = prediction.

    Rows of classes absent from ``data`` are left at zero.
    """
    K = model.n_classes
    counts = np.zeros((K, K))
    np.add.at(counts, (data.labels, predict(model, data.data)), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def block_permuted_bank(dim: int = 10, n_classes: int = 3, block: int = 3,
                        values: Sequence[float] = (0.3, 0.0, 0.0), mu: float = 0.5,
                        beta: float = 3.0) -> ClassBank:
    """Classes sharing ``mu`` whose diagonal interaction blocks carry permuted values.

    Class ``k`` puts ``values[(b - k) % len(values)]`` on the ``b``-th
    ``block x block`` diagonal block; all other interactions are zero.
    """
    nb = len(values)
    if nb * block > dim:
        raise ValidationError(f"{nb} blocks of size {block} do not fit in dimension {dim}")
    params = []
    for k in range(n_classes):
        alpha = np.zeros((dim, dim))
        for b in range(nb):
            s = slice(b * block, (b + 1) * block)
            alpha[s, s] = values[(b - k) % nb]
        params.append(HawkesParams(np.full(dim, float(mu)), alpha, float(beta)))
    return ClassBank(tuple(params), np.full(n_classes, 1.0 / n_classes))
