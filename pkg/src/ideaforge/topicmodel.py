"""Latent Dirichlet Allocation by collapsed Gibbs sampling, with the model
selection diagnostics used to pick a topic count (held-out perplexity and
UMass coherence).

Reproducibility contract: one numpy PCG64 generator per fit, seeded with
the 64-bit hyper.seed. It is consumed in a fixed order (initial topic
draws, then one uniform per token per sweep), so identical
(seed, hyper, matrix) inputs give bit-identical models for a given numpy
version. Tokens are expanded from the sparse matrix in canonical order:
documents in matrix order, term indices ascending within a document,
repeated count times.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _gibbs
from .canonical import canonical_json, load_json, write_canonical_json
from .errors import ConfigError, DataError
from .textprep import DocTermMatrix

# generator used to derive the independent stream for held-out fold-in
_PERPLEXITY_SEED_SALT = 0x9E3779B97F4A7C15


@dataclass
class LdaHyper:
    n_topics: int
    seed: int
    alpha: float | None = None  # resolved to 50 / n_topics when None
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 900
    sample_lag: int = 10

    def __post_init__(self):
        if self.n_topics < 1:
            raise ConfigError("n_topics must be >= 1")
        if self.alpha is None:
            self.alpha = 50.0 / self.n_topics
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("alpha and beta must be positive")
        if not (0 <= self.burn_in < self.iterations):
            raise ConfigError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.sample_lag < 1:
            raise ConfigError("sample_lag must be >= 1")
        if (self.iterations - self.burn_in) // self.sample_lag < 1:
            raise ConfigError(
                "no posterior samples: need iterations - burn_in >= sample_lag")

    @property
    def n_samples(self) -> int:
        return (self.iterations - self.burn_in) // self.sample_lag

    def to_dict(self) -> dict:
        return {
            "n_topics": self.n_topics, "seed": self.seed, "alpha": self.alpha,
            "beta": self.beta, "iterations": self.iterations,
            "burn_in": self.burn_in, "sample_lag": self.sample_lag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LdaHyper":
        return cls(**d)


@dataclass
class ModelDiagnostics:
    perplexity: float
    umass_coherence_per_topic: list[float]
    mean_coherence: float
    log_likelihood_trace: list[float]

    def to_dict(self) -> dict:
        return {
            "perplexity": self.perplexity,
            "umass_coherence_per_topic": self.umass_coherence_per_topic,
            "mean_coherence": self.mean_coherence,
            "log_likelihood_trace": self.log_likelihood_trace,
        }


@dataclass
class TopicModel:
    phi: np.ndarray    # K x V, rows sum to 1
    theta: np.ndarray  # D x K, rows sum to 1
    assignments: np.ndarray  # final-sweep topic label per token
    hyper: LdaHyper
    diagnostics: ModelDiagnostics | None = None
    terms: list[str] | None = None
    # token expansion and retained post-burn-in state, kept for the
    # evolution estimator and for held-out evaluation
    doc_of_token: np.ndarray | None = None
    word_of_token: np.ndarray | None = None
    sample_assignments: list[np.ndarray] = field(default_factory=list)
    sample_nkw_total: np.ndarray | None = None  # K x V int64, summed over samples

    @property
    def n_topics(self) -> int:
        return self.phi.shape[0]

    @property
    def n_terms(self) -> int:
        return self.phi.shape[1]

    @property
    def n_docs(self) -> int:
        return self.theta.shape[0]


def expand_tokens(dtm: DocTermMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Canonical token expansion (doc order, ascending term index, count
    repeats). Returns (doc_of_token, word_of_token)."""
    docs = []
    words = []
    for d in range(dtm.n_docs):
        idx = dtm.doc_indices[d]
        cnt = dtm.doc_counts[d]
        n_d = int(cnt.sum())
        docs.append(np.full(n_d, d, dtype=np.int32))
        words.append(np.repeat(idx.astype(np.int32), cnt))
    if not docs:
        return np.empty(0, dtype=np.int32), np.empty(0, dtype=np.int32)
    return np.concatenate(docs), np.concatenate(words)


def phi_from_counts(nkw: np.ndarray, beta: float) -> np.ndarray:
    """Posterior-mean topic-term rows: (n_kw + beta) / (n_k + V*beta).

    Shared by the fit and the slice-conditional evolution estimator so a
    single-slice evolution reproduces the global rows bit-for-bit.
    """
    nkw = nkw.astype(np.float64)
    denom = nkw.sum(axis=1, keepdims=True) + nkw.shape[1] * beta
    return (nkw + beta) / denom


def theta_from_counts(ndk: np.ndarray, alpha: float) -> np.ndarray:
    ndk = ndk.astype(np.float64)
    denom = ndk.sum(axis=1, keepdims=True) + ndk.shape[1] * alpha
    return (ndk + alpha) / denom


def _check_tables(z, doc_of, word_of, ndk, nkw, nk):
    n_docs, n_topics = ndk.shape
    ndk2 = np.zeros_like(ndk)
    nkw2 = np.zeros_like(nkw)
    np.add.at(ndk2, (doc_of, z), 1)
    np.add.at(nkw2, (z, word_of), 1)
    if not (np.array_equal(ndk, ndk2) and np.array_equal(nkw, nkw2)
            and np.array_equal(nk, nkw.sum(axis=1))):
        raise AssertionError("Gibbs count tables inconsistent with assignments")


class GibbsSampler:
    """Mutable sampler state; drives sweeps and exposes snapshots.

    fit_lda wraps this; tests use it directly to inspect per-sweep
    assignment states.
    """

    def __init__(self, dtm: DocTermMatrix, hyper: LdaHyper):
        if dtm.total_tokens < 1:
            raise DataError("cannot fit: document-term matrix has no tokens")
        if dtm.n_docs - len(dtm.empty_docs) < 1:
            raise DataError("cannot fit: no nonempty documents")
        if hyper.n_topics > dtm.n_terms:
            raise DataError(
                f"n_topics={hyper.n_topics} exceeds vocabulary size {dtm.n_terms}")
        self.hyper = hyper
        self.n_docs = dtm.n_docs
        self.n_terms = dtm.n_terms
        self.doc_of, self.word_of = expand_tokens(dtm)
        self.rng = np.random.default_rng(np.uint64(hyper.seed))
        n = self.doc_of.shape[0]
        self.z = self.rng.integers(0, hyper.n_topics, size=n).astype(np.int32)
        self.ndk = np.zeros((self.n_docs, hyper.n_topics), dtype=np.int64)
        self.nkw = np.zeros((hyper.n_topics, self.n_terms), dtype=np.int64)
        np.add.at(self.ndk, (self.doc_of, self.z), 1)
        np.add.at(self.nkw, (self.z, self.word_of), 1)
        self.nk = self.nkw.sum(axis=1)
        self.nd = self.ndk.sum(axis=1)

    def sweep(self):
        uniforms = self.rng.random(self.z.shape[0])
        _gibbs.lda_sweep(self.z, self.doc_of, self.word_of, self.ndk,
                         self.nkw, self.nk, self.hyper.alpha,
                         self.hyper.beta, uniforms)

    def log_likelihood(self) -> float:
        return float(_gibbs.joint_log_likelihood(
            self.ndk, self.nkw, self.nk, self.nd,
            self.hyper.alpha, self.hyper.beta))


def fit_lda(
    dtm: DocTermMatrix,
    hyper: LdaHyper,
    terms: list[str] | None = None,
    check_tables: bool = False,
    with_diagnostics: bool = True,
) -> TopicModel:
    """Fit LDA; phi/theta are averages of the posterior-mean estimates
    taken every sample_lag sweeps after burn_in."""
    sampler = GibbsSampler(dtm, hyper)
    n_topics = hyper.n_topics

    phi_acc = np.zeros((n_topics, sampler.n_terms))
    theta_acc = np.zeros((sampler.n_docs, n_topics))
    nkw_total = np.zeros((n_topics, sampler.n_terms), dtype=np.int64)
    samples: list[np.ndarray] = []
    ll_trace: list[float] = []

    for it in range(1, hyper.iterations + 1):
        sampler.sweep()
        if check_tables:
            _check_tables(sampler.z, sampler.doc_of, sampler.word_of,
                          sampler.ndk, sampler.nkw, sampler.nk)
        ll = sampler.log_likelihood()
        if not math.isfinite(ll):
            raise DataError(f"non-finite joint log-likelihood at sweep {it}")
        ll_trace.append(ll)
        if it > hyper.burn_in and (it - hyper.burn_in) % hyper.sample_lag == 0:
            phi_acc += phi_from_counts(sampler.nkw, hyper.beta)
            theta_acc += theta_from_counts(sampler.ndk, hyper.alpha)
            nkw_total += sampler.nkw
            samples.append(sampler.z.copy())

    n_samples = len(samples)
    phi = phi_acc / n_samples
    theta = theta_acc / n_samples

    model = TopicModel(
        phi=phi, theta=theta, assignments=sampler.z.copy(), hyper=hyper,
        terms=list(terms) if terms is not None else None,
        doc_of_token=sampler.doc_of, word_of_token=sampler.word_of,
        sample_assignments=samples, sample_nkw_total=nkw_total,
    )
    coh_topics, coh_mean = umass_coherence(model, dtm) if with_diagnostics else ([], 0.0)
    perp = perplexity(model, dtm) if with_diagnostics else float("nan")
    model.diagnostics = ModelDiagnostics(
        perplexity=perp,
        umass_coherence_per_topic=coh_topics,
        mean_coherence=coh_mean,
        log_likelihood_trace=ll_trace,
    ) if with_diagnostics else None
    return model


def _term_sort_key(model: TopicModel):
    if model.terms is not None:
        return lambda v: model.terms[v]
    return lambda v: v


def top_terms(model: TopicModel, k: int, n: int) -> list[tuple[str, float]]:
    """Top-n terms of topic k by probability, ties broken lexicographically."""
    if not (0 <= k < model.n_topics):
        raise ConfigError(f"topic index {k} out of range [0, {model.n_topics})")
    key = _term_sort_key(model)
    row = model.phi[k]
    order = sorted(range(model.n_terms), key=lambda v: (-row[v], key(v)))
    names = model.terms if model.terms is not None else [str(v) for v in range(model.n_terms)]
    return [(names[v], float(row[v])) for v in order[:n]]


@dataclass
class PerplexityResult:
    value: float
    n_test_tokens: int
    skipped_docs: int


def document_completion_perplexity(
    model: TopicModel, heldout: DocTermMatrix, foldin_passes: int = 200,
) -> PerplexityResult:
    """Held-out perplexity by document completion.

    Each held-out document's tokens (canonical order) are split by
    alternating position: even positions fold in, odd positions are test
    tokens. theta is estimated on the fold-in half by Gibbs passes with
    phi frozen; the fold-in stream is an independent generator seeded from
    hyper.seed so evaluation never perturbs a fit. Documents with fewer
    than two tokens are skipped and counted.
    """
    if heldout.n_terms != model.n_terms:
        raise DataError("held-out matrix vocabulary size differs from the model")
    n_topics = model.n_topics
    alpha = model.hyper.alpha

    fold_doc: list[np.ndarray] = []
    fold_word: list[np.ndarray] = []
    test_word: list[np.ndarray] = []
    test_doc: list[np.ndarray] = []
    skipped = 0
    row = 0
    for d in range(heldout.n_docs):
        idx = heldout.doc_indices[d]
        cnt = heldout.doc_counts[d]
        toks = np.repeat(idx.astype(np.int32), cnt)
        if toks.shape[0] < 2:
            skipped += 1
            continue
        fold = toks[0::2]
        test = toks[1::2]
        fold_doc.append(np.full(fold.shape[0], row, dtype=np.int32))
        fold_word.append(fold)
        test_doc.append(np.full(test.shape[0], row, dtype=np.int32))
        test_word.append(test)
        row += 1

    if row == 0:
        raise DataError("no held-out documents with >= 2 tokens")

    fold_doc_arr = np.concatenate(fold_doc)
    fold_word_arr = np.concatenate(fold_word)
    test_doc_arr = np.concatenate(test_doc)
    test_word_arr = np.concatenate(test_word)

    rng = np.random.default_rng(np.uint64(model.hyper.seed) ^ np.uint64(_PERPLEXITY_SEED_SALT))
    n_fold = fold_word_arr.shape[0]
    zf = _gibbs.init_assignments_weighted(fold_word_arr, model.phi, rng.random(n_fold))
    ndk = np.zeros((row, n_topics), dtype=np.int64)
    np.add.at(ndk, (fold_doc_arr, zf), 1)
    for _ in range(foldin_passes):
        _gibbs.foldin_sweep(zf, fold_doc_arr, fold_word_arr, ndk, model.phi,
                            alpha, rng.random(n_fold))

    theta = theta_from_counts(ndk, alpha)
    probs = np.einsum("dk,kd->d", theta[test_doc_arr],
                      model.phi[:, test_word_arr])
    n_test = test_word_arr.shape[0]
    log_lik = float(np.log(probs).sum())
    return PerplexityResult(value=math.exp(-log_lik / n_test),
                            n_test_tokens=n_test, skipped_docs=skipped)


def perplexity(model: TopicModel, heldout: DocTermMatrix) -> float:
    return document_completion_perplexity(model, heldout).value


def umass_coherence(
    model: TopicModel, dtm: DocTermMatrix, top_n: int = 10,
) -> tuple[list[float], float]:
    """UMass coherence per topic and its mean over topics.

    For the top_n terms of a topic ordered by probability,
    score = sum over ordered pairs (i > j) of
    ln((co_doc_count(w_i, w_j) + 1) / doc_count(w_j)), counted on binary
    document incidence in the training matrix.
    """
    if top_n < 2:
        raise ConfigError("top_n must be >= 2 for coherence")
    if dtm.n_terms != model.n_terms:
        raise DataError("matrix vocabulary size differs from the model")
    top_n = min(top_n, model.n_terms)

    # document incidence sets for every term that appears in some top list
    key = _term_sort_key(model)
    topic_terms = []
    needed: set[int] = set()
    for k in range(model.n_topics):
        row = model.phi[k]
        order = sorted(range(model.n_terms), key=lambda v: (-row[v], key(v)))[:top_n]
        topic_terms.append(order)
        needed.update(order)

    doc_sets: dict[int, np.ndarray] = {v: [] for v in needed}
    for d in range(dtm.n_docs):
        for v in dtm.doc_indices[d]:
            vi = int(v)
            if vi in doc_sets:
                doc_sets[vi].append(d)
    doc_sets = {v: np.asarray(ds, dtype=np.int64) for v, ds in doc_sets.items()}

    per_topic = []
    for order in topic_terms:
        score = 0.0
        for i in range(1, len(order)):
            w_i = order[i]
            for j in range(i):
                w_j = order[j]
                df_j = doc_sets[w_j].shape[0]
                co = np.intersect1d(doc_sets[w_i], doc_sets[w_j],
                                    assume_unique=True).shape[0]
                if df_j == 0:
                    # phi is smoothed, so a top term may never occur in the
                    # matrix; treat as maximally incoherent
                    score += math.log(1.0 / dtm.n_docs)
                else:
                    score += math.log((co + 1.0) / df_j)
        per_topic.append(score)
    mean = float(np.mean(per_topic)) if per_topic else 0.0
    return per_topic, mean


@dataclass
class SweepEntry:
    n_topics: int
    perplexity: float
    mean_coherence: float


@dataclass
class SweepResult:
    entries: list[SweepEntry]
    selected: int
    select_by: str

    def to_dict(self) -> dict:
        return {
            "entries": [{"n_topics": e.n_topics, "perplexity": e.perplexity,
                         "mean_coherence": e.mean_coherence} for e in self.entries],
            "selected": self.selected,
            "select_by": self.select_by,
        }


def sweep_topic_counts(
    dtm: DocTermMatrix,
    k_grid: list[int],
    hyper_template: LdaHyper,
    seed: int | None = None,
    select_by: str = "coherence",
    terms: list[str] | None = None,
    max_workers: int | None = None,
) -> SweepResult:
    """Fit one model per topic count (seed policy: seed XOR K) and select
    the best by mean coherence (default) or perplexity; ties go to the
    smaller K. Per-K fits run concurrently."""
    if not k_grid:
        raise ConfigError("empty topic-count grid")
    if select_by not in ("coherence", "perplexity"):
        raise ConfigError("select_by must be 'coherence' or 'perplexity'")
    base_seed = hyper_template.seed if seed is None else seed
    for k in k_grid:
        if not (1 <= k <= dtm.n_terms):
            raise ConfigError(f"grid value {k} outside [1, V={dtm.n_terms}]")

    def fit_one(k: int) -> SweepEntry:
        hyper = replace(hyper_template, n_topics=k, alpha=None,
                        seed=int(np.uint64(base_seed) ^ np.uint64(k)))
        model = fit_lda(dtm, hyper, terms=terms)
        return SweepEntry(n_topics=k,
                          perplexity=model.diagnostics.perplexity,
                          mean_coherence=model.diagnostics.mean_coherence)

    if max_workers is None:
        import os
        max_workers = min(len(k_grid), os.cpu_count() or 1)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            entries = list(pool.map(fit_one, k_grid))
    else:
        entries = [fit_one(k) for k in k_grid]
    entries.sort(key=lambda e: e.n_topics)

    if select_by == "coherence":
        best = min(entries, key=lambda e: (-e.mean_coherence, e.n_topics))
    else:
        best = min(entries, key=lambda e: (e.perplexity, e.n_topics))
    return SweepResult(entries=entries, selected=best.n_topics, select_by=select_by)


def save_model(model: TopicModel, path, vocabulary_hash: str) -> None:
    """Persist as canonical JSON: hyper, vocabulary hash, phi/theta row-major,
    diagnostics."""
    doc = {
        "format": "ideaforge-topic-model",
        "schema_version": 1,
        "hyper": model.hyper.to_dict(),
        "vocabulary_hash": vocabulary_hash,
        "n_topics": model.n_topics,
        "n_terms": model.n_terms,
        "n_docs": model.n_docs,
        "phi": model.phi.reshape(-1),
        "theta": model.theta.reshape(-1),
        "diagnostics": model.diagnostics.to_dict() if model.diagnostics else None,
    }
    write_canonical_json(doc, path)


def load_model(path, expected_vocabulary_hash: str | None = None,
               terms: list[str] | None = None) -> TopicModel:
    doc = load_json(path)
    if doc.get("format") != "ideaforge-topic-model":
        raise DataError(f"{path}: not a topic-model artifact")
    if expected_vocabulary_hash is not None and doc["vocabulary_hash"] != expected_vocabulary_hash:
        raise DataError(
            f"{path}: vocabulary hash mismatch (model was fitted against a "
            f"different vocabulary)")
    hyper = LdaHyper.from_dict(doc["hyper"])
    n_topics, n_terms, n_docs = doc["n_topics"], doc["n_terms"], doc["n_docs"]
    phi = np.asarray(doc["phi"], dtype=np.float64).reshape(n_topics, n_terms)
    theta = np.asarray(doc["theta"], dtype=np.float64).reshape(n_docs, n_topics)
    diag = None
    if doc.get("diagnostics"):
        dd = doc["diagnostics"]
        diag = ModelDiagnostics(
            perplexity=dd["perplexity"],
            umass_coherence_per_topic=dd["umass_coherence_per_topic"],
            mean_coherence=dd["mean_coherence"],
            log_likelihood_trace=dd["log_likelihood_trace"],
        )
    return TopicModel(phi=phi, theta=theta,
                      assignments=np.empty(0, dtype=np.int32),
                      hyper=hyper, diagnostics=diag, terms=terms)
