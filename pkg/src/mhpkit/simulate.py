"""Exact sampling of exponential MHP paths.

:func:`simulate_cluster` uses the branching representation: Poisson
immigrants, then generation after generation of Poisson offspring placed at
exponential delays after their parent. :func:`simulate_thinning` is Ogata's
rejection sampler, kept as an independent check of the former.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset, HawkesParams, Path, ValidationError, validate


@dataclass(frozen=True)
class SimulationConfig:
    params: HawkesParams
    end_time: float
    n_samples: int = 1
    seed: Optional[int] = None
    allow_degenerate: bool = False

    def __post_init__(self):
        if not self.end_time > 0:
            raise ValidationError(f"end_time must be positive, got {self.end_time}")
        if int(self.n_samples) < 1:
            raise ValidationError(f"n_samples must be >= 1, got {self.n_samples}")
        validate(self.params, allow_zero_mu=self.allow_degenerate).raise_for_simulation()


def _sample_streams(seed, n):
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in root.spawn(n)]


def cluster_path(params: HawkesParams, end_time: float, rng: np.random.Generator) -> Path:
    """One path on ``[0, end_time)`` from the cluster representation.

    Children whose time already falls beyond the horizon are dropped before
    they reproduce; their descendants would land later still, so the
    retained events match the simulate-then-truncate procedure exactly.
    """
    mu, alpha, beta = params.mu, params.alpha, params.beta
    d = params.dim
    T = float(end_time)
    scale = 1.0 / beta
    accepted = [[] for _ in range(d)]
    ancestors = []
    for j in range(d):
        k = rng.poisson(mu[j] * T)
        a = rng.uniform(0.0, T, size=k)
        ancestors.append(a)
        accepted[j].append(a)
    while any(a.size for a in ancestors):
        offspring = [[] for _ in range(d)]
        for j in range(d):
            parents = ancestors[j]
            if not parents.size:
                continue
            for jj in range(d):
                rate = alpha[jj, j]
                if rate <= 0:
                    continue
                k = rng.poisson(rate, size=parents.size)
                total = int(k.sum())
                if not total:
                    continue
                kids = np.repeat(parents, k) + rng.exponential(scale, size=total)
                offspring[jj].append(kids[kids < T])
        ancestors = [np.concatenate(o) if o else np.empty(0) for o in offspring]
        for j in range(d):
            if ancestors[j].size:
                accepted[j].append(ancestors[j])
    events = tuple(np.sort(np.concatenate(acc)) for acc in accepted)
    return Path(events, T)


def simulate_cluster(config: SimulationConfig, n_jobs: int = 1) -> Dataset:
    """Sample ``config.n_samples`` independent paths.

    Each path draws from its own stream spawned from ``config.seed``, so the
    output does not depend on ``n_jobs`` or on scheduling order.
    """
    streams = _sample_streams(config.seed, int(config.n_samples))

    def one(rng):
        return cluster_path(config.params, config.end_time, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            paths = list(pool.map(one, streams))
    else:
        paths = [one(rng) for rng in streams]
    return Dataset(tuple(paths), float(config.end_time))


def simulate_thinning(params: HawkesParams, end_time: float, seed=None) -> Path:
    """One path by Ogata thinning.

    Between events the total intensity only decays, so its value just after
    the current time dominates it until the next candidate.
    """
    validate(params).raise_for_simulation()
    if not end_time > 0:
        raise ValidationError(f"end_time must be positive, got {end_time}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mu, alpha, beta = params.mu, params.alpha, params.beta
    d = params.dim
    T = float(end_time)
    excitation = np.zeros(d)  # sum over past events of beta * exp(-beta (t - s)), per source
    t = 0.0
    events = [[] for _ in range(d)]
    while True:
        lam = mu + alpha @ excitation
        bound = lam.sum()
        if bound <= 0:
            break
        wait = rng.exponential(1.0 / bound)
        t_new = t + wait
        if t_new >= T:
            break
        excitation *= np.exp(-beta * wait)
        t = t_new
        lam = mu + alpha @ excitation
        u = rng.uniform(0.0, bound)
        total = lam.sum()
        if u < total:
            j = int(np.searchsorted(np.cumsum(lam), u, side="right"))
            j = min(j, d - 1)
            events[j].append(t)
            excitation[j] += beta
    return Path(tuple(np.array(e) for e in events), T)


def simulate_thinning_dataset(params: HawkesParams, end_time: float, n_samples: int,
                              seed=None) -> Dataset:
    streams = _sample_streams(seed, int(n_samples))
    return Dataset(tuple(simulate_thinning(params, end_time, rng) for rng in streams),
                   float(end_time))
