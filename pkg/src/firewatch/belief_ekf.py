"""Bank of independent scalar Kalman filters, one per grid cell."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from firewatch.maps import BeliefMap


@dataclass(frozen=True)
class EkfBelief:
    mu: np.ndarray  # flat, one entry per cell
    sigma: np.ndarray
    shape: tuple
    q: float = 1e-3
    r: float = 0.5
    threshold: float = 0.5

    @classmethod
    def initial(cls, shape, mu0: float = 0.0, sigma0: float = 0.1, **kw) -> EkfBelief:
        n = int(np.prod(shape))
        return cls(np.full(n, mu0), np.full(n, sigma0), tuple(shape), **kw)


def predict(belief: EkfBelief) -> EkfBelief:
    if belief.q == 0:
        return belief
    return replace(belief, sigma=belief.sigma + belief.q)


def occurrence_rank(cells: np.ndarray) -> np.ndarray:
    """For each entry, how many earlier entries hit the same cell."""
    order = np.argsort(cells, kind="stable")
    sorted_cells = cells[order]
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_cells)) + 1]
    group_start = np.repeat(starts, np.diff(np.r_[starts, len(cells)]))
    rank = np.empty(len(cells), dtype=np.int64)
    rank[order] = np.arange(len(cells)) - group_start
    return rank


def correct(belief: EkfBelief, cells, observations) -> EkfBelief:
    """Apply observations ``y`` in {0, 1} to their cells.

    The innovation is ``y - 1{mu_bar > 0.5}``.  Repeated hits on one cell are
    applied sequentially in the order given; distinct cells update in bulk.
    """
    cells = np.asarray(cells, dtype=np.int64)
    y = np.asarray(observations, dtype=float)
    mu = belief.mu.copy()
    sigma = belief.sigma.copy()
    if cells.size == 0:
        return belief
    rank = occurrence_rank(cells)
    for k in range(int(rank.max()) + 1):
        sel = rank == k
        c = cells[sel]
        s_bar = sigma[c]
        m_bar = mu[c]
        gain = s_bar / (s_bar + belief.r)
        mu[c] = m_bar + gain * (y[sel] - (m_bar > 0.5))
        sigma[c] = s_bar - gain * s_bar
    return replace(belief, mu=mu, sigma=sigma)


def belief_map(belief: EkfBelief) -> BeliefMap:
    return BeliefMap(belief.mu.reshape(belief.shape), belief.threshold)
