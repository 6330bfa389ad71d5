"""Per-year topic-term evolution and term trajectories.

Two estimators:

* slice_conditional (default): re-estimates each year's topic-term rows
  from the global model's retained post-burn-in assignment samples,
  restricted to that year's documents. Pure re-aggregation: cheap, exact,
  and pools back to the global model (a single slice covering the whole
  corpus reproduces the global rows bit-for-bit).
* chained_prior: refits each slice by collapsed Gibbs, carrying the
  previous slice's rows forward as per-(topic, term) pseudo-counts
  beta + eta * M * phi_prev. With eta = 0 the coupling is off and the
  result equals independent per-slice fits (same seeds) exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _gibbs
from .canonical import load_json, write_canonical_json
from .corpus import SliceIndex
from .errors import ConfigError, DataError
from .textprep import DocTermMatrix
from .topicmodel import (GibbsSampler, LdaHyper, TopicModel, expand_tokens,
                         fit_lda, phi_from_counts)

STORAGE_FLOOR = 1e-6


@dataclass
class DynamicsConfig:
    mode: str = "slice_conditional"
    eta: float = 0.5
    prior_mass: float | None = None  # defaults to 100 * beta * V at use time

    def __post_init__(self):
        if self.mode not in ("slice_conditional", "chained_prior"):
            raise ConfigError(f"unknown dynamics mode {self.mode!r}")
        if not np.isfinite(self.eta) or self.eta < 0:
            raise ConfigError("eta must be finite and >= 0")
        if self.prior_mass is not None and not (np.isfinite(self.prior_mass) and self.prior_mass > 0):
            raise ConfigError("prior_mass must be finite and positive")

    def resolved_prior_mass(self, beta: float, n_terms: int) -> float:
        return self.prior_mass if self.prior_mass is not None else 100.0 * beta * n_terms


@dataclass
class TimeSeries:
    years: list[int]
    values: list[float]
    label: str = ""
    flagged_years: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.years) != len(self.values):
            raise ConfigError("years and values must have equal length")
        if any(b <= a for a, b in zip(self.years, self.years[1:])):
            raise ConfigError("years must be strictly increasing")

    def __len__(self) -> int:
        return len(self.years)

    def points(self) -> list[tuple[int, float]]:
        return list(zip(self.years, self.values))


@dataclass
class TopicEvolution:
    years: list[int]
    phi_t: np.ndarray               # T x K x V
    counts_tkw_total: np.ndarray    # T x K x V, summed over retained samples
    sample_count: int
    cell_floors: np.ndarray         # T x K value of zero-count terms
    smoothing_beta: float
    mode: str
    terms: list[str] | None = None

    @property
    def n_slices(self) -> int:
        return self.phi_t.shape[0]

    @property
    def n_topics(self) -> int:
        return self.phi_t.shape[1]

    @property
    def n_terms(self) -> int:
        return self.phi_t.shape[2]

    def topic_token_counts(self) -> np.ndarray:
        """Mean tokens per (slice, topic) over retained samples."""
        return self.counts_tkw_total.sum(axis=2) / self.sample_count

    def empty_cells(self) -> list[tuple[int, int]]:
        tk = np.argwhere(self.counts_tkw_total.sum(axis=2) == 0)
        return [(int(t), int(k)) for t, k in tk]


def _slice_of_documents(slices: SliceIndex, n_docs: int) -> np.ndarray:
    out = np.full(n_docs, -1, dtype=np.int64)
    for t, idxs in enumerate(slices.slices):
        for d in idxs:
            if not (0 <= d < n_docs):
                raise DataError(f"slice for year {slices.years[t]} references "
                                f"unknown document index {d}")
            out[d] = t
    return out


def slice_topic_distributions(
    model: TopicModel, slices: SliceIndex, cfg: DynamicsConfig | None = None,
) -> TopicEvolution:
    """Slice-conditional evolution over the fitted model's retained samples.

    phi_t[t, k] averages, over the same post-burn-in samples the model
    itself averaged, the smoothed rows (n_tkw + beta) / (n_tk + V*beta)
    counted inside slice-t documents. A (slice, topic) cell with no tokens
    yields the uniform row 1/V. Documents outside every slice contribute
    nothing.
    """
    cfg = cfg or DynamicsConfig()
    if not model.sample_assignments:
        raise DataError("model carries no posterior samples; refit with fit_lda "
                        "in this process to compute an evolution")
    beta = model.hyper.beta
    n_topics, n_terms = model.n_topics, model.n_terms
    n_slices = len(slices)

    slice_of_doc = _slice_of_documents(slices, model.n_docs)
    token_slice = slice_of_doc[model.doc_of_token]
    in_range = token_slice >= 0
    tok_t = token_slice[in_range]
    tok_w = model.word_of_token[in_range]

    phi_acc = np.zeros((n_slices, n_topics, n_terms))
    counts_total = np.zeros((n_slices, n_topics, n_terms), dtype=np.int64)
    for z_s in model.sample_assignments:
        counts_s = np.zeros((n_slices, n_topics, n_terms), dtype=np.int64)
        np.add.at(counts_s, (tok_t, z_s[in_range], tok_w), 1)
        for t in range(n_slices):
            phi_acc[t] += phi_from_counts(counts_s[t], beta)
        counts_total += counts_s

    n_samples = len(model.sample_assignments)
    phi_t = phi_acc / n_samples

    # value shared by every zero-count term of a cell: mean over samples of
    # beta / (n_tk + V*beta)
    floors = np.zeros((n_slices, n_topics))
    for z_s in model.sample_assignments:
        ntk = np.zeros((n_slices, n_topics), dtype=np.int64)
        np.add.at(ntk, (tok_t, z_s[in_range]), 1)
        floors += beta / (ntk + n_terms * beta)
    floors /= n_samples

    return TopicEvolution(
        years=list(slices.years), phi_t=phi_t, counts_tkw_total=counts_total,
        sample_count=n_samples, cell_floors=floors, smoothing_beta=beta,
        mode="slice_conditional", terms=model.terms,
    )


def _sub_matrix(dtm: DocTermMatrix, doc_ids: list[int]) -> DocTermMatrix:
    idx = [dtm.doc_indices[d] for d in doc_ids]
    cnt = [dtm.doc_counts[d] for d in doc_ids]
    empty = [i for i, c in enumerate(cnt) if c.sum() == 0]
    return DocTermMatrix(doc_indices=idx, doc_counts=cnt,
                         n_terms=dtm.n_terms, empty_docs=empty)


def _fit_slice_with_prior(
    sub: DocTermMatrix, hyper: LdaHyper, beta_kw: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Collapsed Gibbs with per-(topic, term) pseudo-counts; returns
    (phi_mean, counts_total, n_samples)."""
    beta_ksum = beta_kw.sum(axis=1)
    n_topics = hyper.n_topics
    doc_of, word_of = expand_tokens(sub)
    rng = np.random.default_rng(np.uint64(hyper.seed))
    n = doc_of.shape[0]

    # informed initialization from the carried-forward rows
    z = _gibbs.init_assignments_weighted(word_of, beta_kw, rng.random(n))
    ndk = np.zeros((sub.n_docs, n_topics), dtype=np.int64)
    nkw = np.zeros((n_topics, sub.n_terms), dtype=np.int64)
    np.add.at(ndk, (doc_of, z), 1)
    np.add.at(nkw, (z, word_of), 1)
    nk = nkw.sum(axis=1)

    phi_acc = np.zeros((n_topics, sub.n_terms))
    counts_total = np.zeros_like(nkw)
    n_samples = 0
    for it in range(1, hyper.iterations + 1):
        _gibbs.lda_sweep_asym(z, doc_of, word_of, ndk, nkw, nk,
                              hyper.alpha, beta_kw, beta_ksum, rng.random(n))
        if it > hyper.burn_in and (it - hyper.burn_in) % hyper.sample_lag == 0:
            phi_acc += (nkw + beta_kw) / (nk + beta_ksum)[:, None]
            counts_total += nkw
            n_samples += 1
    return phi_acc / n_samples, counts_total, n_samples


def chained_refit(
    dtm: DocTermMatrix, slices: SliceIndex, hyper: LdaHyper,
    cfg: DynamicsConfig, terms: list[str] | None = None,
) -> TopicEvolution:
    """Sequential per-slice fits; slice t's term prior is
    beta + eta * M * phi_{t-1} (slice 0 uses the symmetric beta).

    Slice seeds follow the seed-XOR-slice-index policy. With eta = 0 each
    slice routes through the plain fit, so the output is bit-identical to
    independent per-slice LDA under the same seeds.
    """
    if cfg.mode != "chained_prior":
        raise ConfigError("chained_refit requires mode='chained_prior'")
    beta = hyper.beta
    n_topics, n_terms = hyper.n_topics, dtm.n_terms
    prior_mass = cfg.resolved_prior_mass(beta, n_terms)

    n_slices = len(slices)
    phi_t = np.zeros((n_slices, n_topics, n_terms))
    counts_total = np.zeros((n_slices, n_topics, n_terms), dtype=np.int64)
    floors = np.zeros((n_slices, n_topics))
    sample_count = hyper.n_samples

    phi_prev: np.ndarray | None = None
    for t in range(n_slices):
        slice_hyper = replace(hyper, seed=int(np.uint64(hyper.seed) ^ np.uint64(t)))
        doc_ids = slices.slices[t]
        sub = _sub_matrix(dtm, doc_ids)
        has_tokens = sub.total_tokens > 0

        if cfg.eta > 0 and phi_prev is not None:
            beta_kw = beta + cfg.eta * prior_mass * phi_prev
            if has_tokens:
                phi_k, counts_k, _ = _fit_slice_with_prior(sub, slice_hyper, beta_kw)
            else:
                phi_k = beta_kw / beta_kw.sum(axis=1, keepdims=True)
                counts_k = np.zeros((n_topics, n_terms), dtype=np.int64)
            floors[t] = beta / beta_kw.sum(axis=1)  # uniform part only; see docs
        else:
            if has_tokens:
                model = fit_lda(sub, slice_hyper, with_diagnostics=False)
                phi_k = model.phi
                counts_k = model.sample_nkw_total
                fl = np.zeros(n_topics)
                for z_s in model.sample_assignments:
                    nk_s = np.bincount(z_s, minlength=n_topics)
                    fl += beta / (nk_s + n_terms * beta)
                floors[t] = fl / len(model.sample_assignments)
            else:
                phi_k = np.full((n_topics, n_terms), 1.0 / n_terms)
                counts_k = np.zeros((n_topics, n_terms), dtype=np.int64)
                floors[t] = 1.0 / n_terms

        phi_t[t] = phi_k
        counts_total[t] = counts_k
        phi_prev = phi_k

    return TopicEvolution(
        years=list(slices.years), phi_t=phi_t, counts_tkw_total=counts_total,
        sample_count=sample_count, cell_floors=floors, smoothing_beta=beta,
        mode="chained_prior", terms=terms,
    )


def _prefix_suggestions(term: str, terms: list[str], limit: int = 10) -> list[str]:
    for width in (4, 3, 2, 1):
        prefix = term[:width]
        if not prefix:
            continue
        hits = sorted(t for t in terms if t.startswith(prefix))
        if hits:
            return hits[:limit]
    return []


def term_trajectory(evolution: TopicEvolution, k: int, term: str) -> TimeSeries:
    """The (year, phi_t[t, k, term]) series for one topic and term;
    years whose (slice, topic) cell had no tokens are flagged."""
    if not (0 <= k < evolution.n_topics):
        raise ConfigError(f"topic index {k} out of range [0, {evolution.n_topics})")
    if evolution.terms is None:
        raise ConfigError("evolution carries no vocabulary terms")
    try:
        v = evolution.terms.index(term)
    except ValueError:
        hints = _prefix_suggestions(term, evolution.terms)
        hint_text = f"; nearest matches: {', '.join(hints)}" if hints else ""
        raise DataError(f"term {term!r} not in vocabulary{hint_text}") from None

    empty = {(t, kk) for t, kk in evolution.empty_cells()}
    flagged = [evolution.years[t] for t in range(evolution.n_slices) if (t, k) in empty]
    values = [float(evolution.phi_t[t, k, v]) for t in range(evolution.n_slices)]
    return TimeSeries(years=list(evolution.years), values=values,
                      label=f"topic{k}:{term}", flagged_years=flagged)


def save_evolution(evolution: TopicEvolution, path) -> None:
    """Persist as JSON with sparse rows: entries above the storage floor
    whose value differs from the cell floor; everything else reconstructs
    to the cell floor (exact for slice_conditional, where all
    zero-count terms of a cell share one value)."""
    cells = []
    for t in range(evolution.n_slices):
        for k in range(evolution.n_topics):
            floor = float(evolution.cell_floors[t, k])
            row = evolution.phi_t[t, k]
            entries = [[int(v), float(row[v])] for v in range(evolution.n_terms)
                       if row[v] > STORAGE_FLOOR and row[v] != floor]
            cells.append({"slice": t, "topic": k, "floor": floor, "entries": entries})
    doc = {
        "format": "ideaforge-topic-evolution",
        "schema_version": 1,
        "mode": evolution.mode,
        "years": evolution.years,
        "n_topics": evolution.n_topics,
        "n_terms": evolution.n_terms,
        "storage_floor": STORAGE_FLOOR,
        "smoothing_beta": evolution.smoothing_beta,
        "sample_count": evolution.sample_count,
        "topic_token_counts_total": evolution.counts_tkw_total.sum(axis=2),
        "cells": cells,
    }
    write_canonical_json(doc, path)


def load_evolution(path, terms: list[str] | None = None) -> TopicEvolution:
    doc = load_json(path)
    if doc.get("format") != "ideaforge-topic-evolution":
        raise DataError(f"{path}: not a topic-evolution artifact")
    n_slices = len(doc["years"])
    n_topics, n_terms = doc["n_topics"], doc["n_terms"]
    phi_t = np.zeros((n_slices, n_topics, n_terms))
    floors = np.zeros((n_slices, n_topics))
    for cell in doc["cells"]:
        t, k = cell["slice"], cell["topic"]
        floors[t, k] = cell["floor"]
        phi_t[t, k, :] = cell["floor"]
        for v, val in cell["entries"]:
            phi_t[t, k, v] = val
    ntk_total = np.asarray(doc["topic_token_counts_total"], dtype=np.int64)
    # per-term counts are not persisted; a T x K x 1 tensor keeps the
    # per-topic totals so empty_cells/topic_token_counts still work
    counts = np.zeros((n_slices, n_topics, 1), dtype=np.int64)
    counts[:, :, 0] = ntk_total
    evo = TopicEvolution(
        years=list(doc["years"]), phi_t=phi_t, counts_tkw_total=counts,
        sample_count=doc["sample_count"], cell_floors=floors,
        smoothing_beta=doc["smoothing_beta"], mode=doc["mode"], terms=terms,
    )
    return evo
