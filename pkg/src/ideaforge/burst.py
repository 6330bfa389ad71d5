"""Two-state burst detection over per-year term document-frequency streams.

A term's stream (r_t docs containing it, out of d_t docs in year t) is
explained by a base state emitting at the global rate p0 = R/D and a burst
state at p1 = min(s * p0, 1 - 1e-6). The minimum-cost state path balances
per-slice fit costs against an up-transition charge gamma * ln(T); maximal
runs of the burst state become intervals weighted by the fit-cost savings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import SliceIndex
from .errors import ConfigError, DataError
from .textprep import DocTermMatrix, Vocabulary

_P1_CAP = 1.0 - 1e-6


@dataclass
class BurstConfig:
    rate_ratio: float = 2.0   # burst-state rate multiplier (> 1)
    gamma: float = 1.0        # up-transition weight (>= 0)

    def __post_init__(self):
        if not self.rate_ratio > 1.0:
            raise ConfigError("rate_ratio must exceed 1")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")


@dataclass
class BurstStream:
    term: str
    years: list[int]
    r: np.ndarray  # docs containing the term, per year
    d: np.ndarray  # docs in the year

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=np.int64)
        self.d = np.asarray(self.d, dtype=np.int64)
        if self.r.shape != self.d.shape or self.r.shape[0] != len(self.years):
            raise ConfigError("stream arrays must align with years")
        if self.r.shape[0] < 2:
            raise ConfigError("a stream needs at least 2 slices")
        if np.any(self.r < 0) or np.any(self.r > self.d):
            raise ConfigError("need 0 <= r_t <= d_t for every slice")
        if int(self.d.sum()) == 0:
            raise ConfigError("stream has no documents at all")


@dataclass
class BurstInterval:
    term: str
    start_year: int
    end_year: int
    weight: float
    ongoing: bool


def burst_counts(dtm: DocTermMatrix, slices: SliceIndex, vocab: Vocabulary,
                 term: str) -> BurstStream:
    """Document-incidence stream for one term; empty years stay as (0, 0)."""
    if term not in vocab:
        raise DataError(f"term {term!r} not in vocabulary")
    v = vocab.index[term]
    r = np.zeros(len(slices), dtype=np.int64)
    d = np.zeros(len(slices), dtype=np.int64)
    for t, doc_ids in enumerate(slices.slices):
        d[t] = len(doc_ids)
        for doc in doc_ids:
            pos = np.searchsorted(dtm.doc_indices[doc], v)
            if pos < dtm.doc_indices[doc].shape[0] and dtm.doc_indices[doc][pos] == v:
                r[t] += 1
    return BurstStream(term=term, years=list(slices.years), r=r, d=d)


def burst_counts_all(dtm: DocTermMatrix, slices: SliceIndex,
                     vocab: Vocabulary) -> dict[str, BurstStream]:
    """Streams for every vocabulary term in one pass over the matrix."""
    n_slices = len(slices)
    d = np.array([len(ids) for ids in slices.slices], dtype=np.int64)
    incidence = np.zeros((n_slices, len(vocab)), dtype=np.int64)
    for t, doc_ids in enumerate(slices.slices):
        for doc in doc_ids:
            incidence[t, dtm.doc_indices[doc]] += 1
    years = list(slices.years)
    return {
        term: BurstStream(term=term, years=years, r=incidence[:, v].copy(), d=d.copy())
        for v, term in enumerate(vocab.terms)
    }


def state_costs(stream: BurstStream, cfg: BurstConfig) -> tuple[np.ndarray, np.ndarray, float]:
    """(sigma0, sigma1, tau): per-slice fit costs for both states and the
    up-transition cost. Slices with d_t = 0 cost nothing in either state."""
    r_total = int(stream.r.sum())
    d_total = int(stream.d.sum())
    if r_total < 1:
        raise DataError(f"term {stream.term!r} never occurs; no stream to fit")
    # reduce the fraction first so scaling every (r_t, d_t) by a common
    # factor leaves p0 bit-identical
    g = math.gcd(r_total, d_total)
    p0 = (r_total // g) / (d_total // g)
    if p0 >= 1.0:
        raise DataError(f"term {stream.term!r} appears in every document; "
                        "no burst state is distinguishable")
    p1 = min(cfg.rate_ratio * p0, _P1_CAP)
    n_slices = stream.r.shape[0]
    sigma0 = np.zeros(n_slices)
    sigma1 = np.zeros(n_slices)
    for t in range(n_slices):
        d_t = int(stream.d[t])
        if d_t == 0:
            continue
        r_t = int(stream.r[t])
        sigma0[t] = -(r_t * math.log(p0) + (d_t - r_t) * math.log(1.0 - p0))
        sigma1[t] = -(r_t * math.log(p1) + (d_t - r_t) * math.log(1.0 - p1))
    tau = cfg.gamma * math.log(n_slices)
    return sigma0, sigma1, tau


def optimal_state_path(sigma0: np.ndarray, sigma1: np.ndarray, tau: float) -> tuple[np.ndarray, float]:
    """Minimum-cost two-state path starting from the base state.

    The path cost is the sum of per-slice fit costs plus tau per 0 -> 1
    transition (a path opening in state 1 pays tau once); 1 -> 0 is free.
    The forward recursion adds costs in ascending slice order (transition
    before emission), so a path's DP value is bit-identical to summing its
    costs left to right. Ties prefer the base state, resolved from the
    final slice backwards, making the result fully deterministic.
    """
    n = sigma0.shape[0]
    # f[t][s]: minimal cost of slices 0..t ending in state s
    f = np.zeros((n, 2))
    back = np.zeros((n, 2), dtype=np.int64)
    f[0, 0] = sigma0[0]
    f[0, 1] = tau + sigma1[0]
    for t in range(1, n):
        c0, c1 = f[t - 1, 0], f[t - 1, 1]
        back[t, 0] = 0 if c0 <= c1 else 1
        f[t, 0] = (c0 if c0 <= c1 else c1) + sigma0[t]
        e0, e1 = f[t - 1, 0] + tau, f[t - 1, 1]
        back[t, 1] = 0 if e0 <= e1 else 1
        f[t, 1] = (e0 if e0 <= e1 else e1) + sigma1[t]

    state = 0 if f[n - 1, 0] <= f[n - 1, 1] else 1
    cost = float(f[n - 1, state])
    path = np.zeros(n, dtype=np.int64)
    for t in range(n - 1, -1, -1):
        path[t] = state
        state = int(back[t, state])
    return path, cost


def detect_bursts(stream: BurstStream, cfg: BurstConfig | None = None) -> list[BurstInterval]:
    """Burst intervals for one stream; empty when the term occurs in every
    document (no burst state is distinguishable) or no run pays for itself."""
    cfg = cfg or BurstConfig()
    try:
        sigma0, sigma1, tau = state_costs(stream, cfg)
    except DataError as exc:
        if "appears in every document" in str(exc):
            return []
        raise
    path, _ = optimal_state_path(sigma0, sigma1, tau)

    intervals = []
    n = path.shape[0]
    t = 0
    while t < n:
        if path[t] == 1:
            start = t
            while t + 1 < n and path[t + 1] == 1:
                t += 1
            weight = float(np.sum(sigma0[start:t + 1] - sigma1[start:t + 1]))
            if weight > 0.0:
                intervals.append(BurstInterval(
                    term=stream.term,
                    start_year=stream.years[start],
                    end_year=stream.years[t],
                    weight=weight,
                    ongoing=(t == n - 1),
                ))
        t += 1
    return intervals


def rank_bursts(intervals: list[BurstInterval], top_n: int | None = None) -> list[BurstInterval]:
    """Order by weight descending, ties by earlier start year, then term."""
    ranked = sorted(intervals, key=lambda b: (-b.weight, b.start_year, b.term))
    return ranked if top_n is None else ranked[:top_n]
