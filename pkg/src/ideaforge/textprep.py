"""Text preparation: tokenization, stopwords, collocations, vocabulary,
and the sparse document-term matrix.

The token pipeline is: split on anything that is not a letter, digit, or
internal hyphen -> lowercase -> length / numeric filters -> British-to-US
mapping -> user lemma overrides -> stemming. Stopword removal is a
separate pass applied both before and after stemming (a stemmed token can
collide with a stopword, and vice versa).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ._porter2 import stem as porter2_stem
from .errors import ConfigError, DataError

_TOKEN_RE = re.compile(r"[^\W_]+(?:-[^\W_]+)*", re.UNICODE)


def _load_data_lines(name: str) -> list[str]:
    text = resources.files("ideaforge.data").joinpath(name).read_text("utf-8")
    lines = []
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


def load_wordlist_file(path) -> set[str]:
    """One word per line, '#' comments, UTF-8."""
    with open(path, "r", encoding="utf-8") as fh:
        return {ln.strip().lower() for ln in fh
                if ln.strip() and not ln.strip().startswith("#")}


def load_pairs_file(path) -> dict[str, str]:
    """Tab-separated `from<TAB>to` pairs, '#' comments, UTF-8."""
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected `from<TAB>to`")
            mapping[parts[0].strip().lower()] = parts[1].strip().lower()
    return mapping


_BUILTIN_STOPWORDS: frozenset[str] | None = None
_BRITISH_TO_US: dict[str, str] | None = None


def builtin_stopwords() -> frozenset[str]:
    global _BUILTIN_STOPWORDS
    if _BUILTIN_STOPWORDS is None:
        _BUILTIN_STOPWORDS = frozenset(_load_data_lines("stopwords_en.txt"))
    return _BUILTIN_STOPWORDS


def british_to_us_map() -> dict[str, str]:
    global _BRITISH_TO_US
    if _BRITISH_TO_US is None:
        mapping = {}
        for line in _load_data_lines("british_american.txt"):
            src, dst = line.split("\t")
            mapping[src] = dst
        _BRITISH_TO_US = mapping
    return _BRITISH_TO_US


@dataclass
class TokenPipelineConfig:
    min_token_len: int = 3
    drop_numeric: bool = True
    stopwords_extra: frozenset[str] = frozenset()
    lemma_overrides: dict[str, str] = field(default_factory=dict)
    british_to_us: bool = True
    use_stemmer: bool = True

    def __post_init__(self):
        if self.min_token_len < 1:
            raise ConfigError("min_token_len must be >= 1")
        self.stopwords_extra = frozenset(w.lower() for w in self.stopwords_extra)
        self.lemma_overrides = {k.lower(): v.lower() for k, v in self.lemma_overrides.items()}


@dataclass
class BigramConfig:
    min_pair_count: int = 10
    npmi_threshold: float = 0.3
    joiner: str = "_"

    def __post_init__(self):
        if self.min_pair_count < 2:
            raise ConfigError("min_pair_count must be >= 2")
        if not (-1.0 < self.npmi_threshold <= 1.0):
            raise ConfigError("npmi_threshold must lie in (-1, 1]")


def _is_numeric(token: str) -> bool:
    return token.replace("-", "").isdigit()


def stem_token(token: str) -> str:
    # hyphenated and digit-bearing tokens bypass the stemmer; it is defined
    # over plain alphabetic words only
    if "-" in token or any(ch.isdigit() for ch in token):
        return token
    return porter2_stem(token)


def surface_tokens(text: str, cfg: TokenPipelineConfig) -> list[str]:
    """The pipeline up to (but not including) stemming."""
    b2us = british_to_us_map() if cfg.british_to_us else {}
    out = []
    for tok in _TOKEN_RE.findall(text.lower()):
        if len(tok) < cfg.min_token_len:
            continue
        if cfg.drop_numeric and _is_numeric(tok):
            continue
        tok = b2us.get(tok, tok)
        tok = cfg.lemma_overrides.get(tok, tok)
        out.append(tok)
    return out


def tokenize(text: str, cfg: TokenPipelineConfig | None = None) -> list[str]:
    cfg = cfg or TokenPipelineConfig()
    toks = surface_tokens(text, cfg)
    if cfg.use_stemmer:
        toks = [stem_token(t) for t in toks]
    return toks


def remove_stopwords(tokens: list[str], extra: frozenset[str] = frozenset()) -> list[str]:
    stops = builtin_stopwords()
    return [t for t in tokens if t not in stops and t not in extra]


def preprocess_texts(texts: list[str], cfg: TokenPipelineConfig | None = None) -> list[list[str]]:
    """Full per-document pipeline with the two-phase stopword rule:
    stopwords are removed on the pre-stem surface form and again after
    stemming."""
    cfg = cfg or TokenPipelineConfig()
    docs = []
    for text in texts:
        toks = surface_tokens(text, cfg)
        toks = remove_stopwords(toks, cfg.stopwords_extra)
        if cfg.use_stemmer:
            toks = [stem_token(t) for t in toks]
            toks = remove_stopwords(toks, cfg.stopwords_extra)
        docs.append(toks)
    return docs


@dataclass
class Collocation:
    left: str
    right: str
    merged: str
    count: int
    npmi: float


def detect_and_merge_bigrams(
    token_docs: list[list[str]], cfg: BigramConfig | None = None,
) -> tuple[list[list[str]], list[Collocation]]:
    """Find collocations by NPMI over adjacent-pair events and merge them.

    NPMI = ln(p(a,b) / (p(a)p(b))) / (-ln p(a,b)), with p(a) and p(b) the
    left- and right-position marginals over the same pair events. Merging
    is a single left-to-right pass, non-overlapping.
    """
    cfg = cfg or BigramConfig()
    pair_counts: dict[tuple[str, str], int] = {}
    left_counts: dict[str, int] = {}
    right_counts: dict[str, int] = {}
    total_pairs = 0
    for toks in token_docs:
        for a, b in zip(toks, toks[1:]):
            pair_counts[(a, b)] = pair_counts.get((a, b), 0) + 1
            left_counts[a] = left_counts.get(a, 0) + 1
            right_counts[b] = right_counts.get(b, 0) + 1
            total_pairs += 1

    collocations = []
    merge_set = {}
    for (a, b), c in pair_counts.items():
        if c < cfg.min_pair_count:
            continue
        p_ab = c / total_pairs
        if p_ab >= 1.0:
            npmi = 1.0  # the corpus consists of this pair alone
        else:
            p_a = left_counts[a] / total_pairs
            p_b = right_counts[b] / total_pairs
            npmi = math.log(p_ab / (p_a * p_b)) / -math.log(p_ab)
        if npmi >= cfg.npmi_threshold:
            merged = a + cfg.joiner + b
            collocations.append(Collocation(a, b, merged, c, npmi))
            merge_set[(a, b)] = merged

    collocations.sort(key=lambda col: (-col.npmi, col.left, col.right))

    if not merge_set:
        return [list(toks) for toks in token_docs], collocations

    merged_docs = []
    for toks in token_docs:
        out = []
        i = 0
        n = len(toks)
        while i < n:
            if i + 1 < n and (toks[i], toks[i + 1]) in merge_set:
                out.append(merge_set[(toks[i], toks[i + 1])])
                i += 2
            else:
                out.append(toks[i])
                i += 1
        merged_docs.append(out)
    return merged_docs, collocations


@dataclass
class Vocabulary:
    terms: list[str]
    df: np.ndarray  # document frequency per term
    n_docs: int
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise DataError("vocabulary terms must be unique")

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index


def build_vocabulary(
    token_docs: list[list[str]],
    min_df: int = 5,
    max_df_ratio: float = 0.5,
    max_terms: int = 50000,
) -> Vocabulary:
    """Prune by document frequency, then cap by total TF-IDF mass.

    Keeps terms with min_df <= df <= floor(max_df_ratio * D); if more than
    max_terms survive, the top max_terms by sum over documents of
    count * ln(D/df) are kept (ties broken lexicographically). Term order
    in the result is lexicographic.
    """
    if not token_docs:
        raise DataError("cannot build a vocabulary from an empty corpus")
    n_docs = len(token_docs)
    df: dict[str, int] = {}
    total: dict[str, int] = {}
    for toks in token_docs:
        for t in set(toks):
            df[t] = df.get(t, 0) + 1
        for t in toks:
            total[t] = total.get(t, 0) + 1

    max_df = math.floor(max_df_ratio * n_docs)
    kept = [t for t, d in df.items() if min_df <= d <= max_df]
    if not kept:
        below = sum(1 for d in df.values() if d < min_df)
        above = sum(1 for d in df.values() if d > max_df)
        raise DataError(
            f"empty vocabulary: of {len(df)} distinct terms, {below} fall below "
            f"min_df={min_df} and {above} above max_df={max_df} "
            f"(max_df_ratio={max_df_ratio}, D={n_docs})"
        )

    if len(kept) > max_terms:
        mass = {t: total[t] * math.log(n_docs / df[t]) for t in kept}
        kept.sort(key=lambda t: (-mass[t], t))
        kept = kept[:max_terms]

    kept.sort()
    df_arr = np.array([df[t] for t in kept], dtype=np.int64)
    return Vocabulary(terms=kept, df=df_arr, n_docs=n_docs)


@dataclass
class DocTermMatrix:
    """Sparse counts: per document, parallel arrays of term indices and
    positive counts, indices strictly increasing."""

    doc_indices: list[np.ndarray]
    doc_counts: list[np.ndarray]
    n_terms: int
    empty_docs: list[int] = field(default_factory=list)

    @property
    def n_docs(self) -> int:
        return len(self.doc_indices)

    @property
    def doc_lengths(self) -> np.ndarray:
        return np.array([int(c.sum()) for c in self.doc_counts], dtype=np.int64)

    @property
    def total_tokens(self) -> int:
        return int(sum(int(c.sum()) for c in self.doc_counts))

    def row(self, d: int) -> dict[int, int]:
        return {int(v): int(c) for v, c in zip(self.doc_indices[d], self.doc_counts[d])}

    def term_totals(self) -> np.ndarray:
        out = np.zeros(self.n_terms, dtype=np.int64)
        for idx, cnt in zip(self.doc_indices, self.doc_counts):
            np.add.at(out, idx, cnt)
        return out


def build_doc_term_matrix(token_docs: list[list[str]], vocab: Vocabulary) -> DocTermMatrix:
    """Count in-vocabulary tokens per document; zero-token docs get flagged
    (they are excluded from model fitting downstream, not dropped here)."""
    doc_indices = []
    doc_counts = []
    empty = []
    for d, toks in enumerate(token_docs):
        counts: dict[int, int] = {}
        for t in toks:
            v = vocab.index.get(t)
            if v is not None:
                counts[v] = counts.get(v, 0) + 1
        if not counts:
            empty.append(d)
        keys = sorted(counts)
        doc_indices.append(np.array(keys, dtype=np.int32))
        doc_counts.append(np.array([counts[k] for k in keys], dtype=np.int64))
    return DocTermMatrix(doc_indices=doc_indices, doc_counts=doc_counts,
                         n_terms=len(vocab), empty_docs=empty)


def tfidf(dtm: DocTermMatrix, vocab: Vocabulary) -> list[np.ndarray]:
    """w[d][v] = n[d][v] * ln(D / df[v]) over the stored entries."""
    if dtm.n_terms != len(vocab):
        raise DataError("document-term matrix and vocabulary sizes differ")
    d_total = dtm.n_docs
    idf = np.log(d_total / vocab.df.astype(np.float64))
    return [cnt.astype(np.float64) * idf[idx]
            for idx, cnt in zip(dtm.doc_indices, dtm.doc_counts)]


def term_frequency_report(dtm: DocTermMatrix, vocab: Vocabulary, top_n: int) -> list[tuple[str, int]]:
    """Corpus-frequency ranking, ties broken lexicographically."""
    if top_n < 1:
        raise ConfigError("top_n must be >= 1")
    totals = dtm.term_totals()
    order = sorted(range(len(vocab)), key=lambda v: (-int(totals[v]), vocab.terms[v]))
    return [(vocab.terms[v], int(totals[v])) for v in order[:top_n]]
