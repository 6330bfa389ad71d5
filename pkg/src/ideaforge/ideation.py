"""Idea-candidate assembly and efficacy scoring.

A candidate bundles, per topic: its label terms, significantly rising and
falling terms, bursts active in the recent window, and strongly correlated
term pairs. Human-rated ideas are scored with a two-level weighted sum
(SAW) over a criteria tree; AHP derives criterion weights from pairwise
comparison matrices with a consistency check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .burst import BurstInterval
from .canonical import load_json
from .dynamics import TopicEvolution
from .errors import ConfigError, DataError
from .topicmodel import phi_from_counts
from .trendlab import CorrelationResult, TrendFit

RATING_SCALE = tuple(round(0.1 * i, 1) for i in range(1, 11))
_WEIGHT_SUM_TOL = 1e-9

# Saaty's random consistency indices for n = 1..10
RANDOM_INDEX = (0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49)
CR_WARNING_LIMIT = 0.1


@dataclass
class CandidateConfig:
    p_threshold: float = 0.05
    r_min: float = 0.5
    burst_window: int = 3      # intervals must touch the last W slices
    trend_top: int = 30        # trend universe: top terms per topic

    def __post_init__(self):
        if not (0 < self.p_threshold < 1):
            raise ConfigError("p_threshold must lie in (0, 1)")
        if not (0 <= self.r_min <= 1):
            raise ConfigError("r_min must lie in [0, 1]")
        if self.burst_window < 1 or self.trend_top < 1:
            raise ConfigError("burst_window and trend_top must be >= 1")


@dataclass
class IdeaCandidate:
    topic: int
    label_terms: list[tuple[str, float]]
    rising_terms: list[tuple[str, float, float]]   # (term, slope, p)
    falling_terms: list[tuple[str, float, float]]
    burst_terms: list[BurstInterval]
    correlated_pairs: list[tuple[str, str, float, float]]  # (a, b, r, p)
    statements: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "topic": self.topic,
            "label_terms": [[t, p] for t, p in self.label_terms],
            "rising_terms": [[t, s, p] for t, s, p in self.rising_terms],
            "falling_terms": [[t, s, p] for t, s, p in self.falling_terms],
            "burst_terms": [{
                "term": b.term, "start_year": b.start_year,
                "end_year": b.end_year, "weight": b.weight,
                "ongoing": b.ongoing,
            } for b in self.burst_terms],
            "correlated_pairs": [[a, b, r, p] for a, b, r, p in self.correlated_pairs],
            "statements": self.statements,
        }


def pooled_label_terms(evolution: TopicEvolution, k: int, n: int = 10) -> list[tuple[str, float]]:
    """Fallback label ranking from the evolution's pooled counts (used when
    no global model ranking is supplied)."""
    counts = evolution.counts_tkw_total.sum(axis=0)
    phi = phi_from_counts(counts, evolution.smoothing_beta)
    terms = evolution.terms or [str(v) for v in range(evolution.n_terms)]
    order = sorted(range(evolution.n_terms), key=lambda v: (-phi[k, v], terms[v]))
    return [(terms[v], float(phi[k, v])) for v in order[:n]]


def assemble_idea_candidates(
    evolution: TopicEvolution,
    trend_fits: dict[int, dict[str, TrendFit]],
    bursts: list[BurstInterval],
    correlations: dict[int, list[tuple[str, str, CorrelationResult]]],
    cfg: CandidateConfig | None = None,
    label_terms: dict[int, list[tuple[str, float]]] | None = None,
    statements: dict[int, list[str]] | None = None,
) -> list[IdeaCandidate]:
    """One candidate per topic, ordered by rising-term count (descending),
    then topic id.

    trend_fits maps topic -> term -> fit over that topic's trajectory
    (callers fit the topic's top trend_top terms); bursts is the corpus-wide
    interval list; correlations maps topic -> unfiltered label-term pair
    results.
    """
    cfg = cfg or CandidateConfig()
    last_years = set(evolution.years[-cfg.burst_window:])
    candidates = []
    for k in range(evolution.n_topics):
        labels = (label_terms or {}).get(k) or pooled_label_terms(evolution, k)
        fits = trend_fits.get(k, {})
        rising = sorted(
            [(t, f.slope, f.p_value) for t, f in fits.items()
             if f.slope > 0 and f.p_value < cfg.p_threshold],
            key=lambda x: (x[2], x[0]))
        falling = sorted(
            [(t, f.slope, f.p_value) for t, f in fits.items()
             if f.slope < 0 and f.p_value < cfg.p_threshold],
            key=lambda x: (x[2], x[0]))

        universe = set(fits)
        recent = [b for b in bursts
                  if b.term in universe
                  and any(b.start_year <= y <= b.end_year for y in last_years)]
        recent.sort(key=lambda b: (-b.weight, b.start_year, b.term))

        pairs = []
        for a, b, res in correlations.get(k, []):
            if abs(res.r) >= cfg.r_min and res.p_value < cfg.p_threshold:
                pairs.append((a, b, res.r, res.p_value))
        pairs.sort(key=lambda x: (-abs(x[2]), x[0], x[1]))

        candidates.append(IdeaCandidate(
            topic=k, label_terms=labels, rising_terms=rising,
            falling_terms=falling, burst_terms=recent,
            correlated_pairs=pairs,
            statements=(statements or {}).get(k, []),
        ))
    candidates.sort(key=lambda c: (-len(c.rising_terms), c.topic))
    return candidates


# --- efficacy model ---------------------------------------------------------

@dataclass
class Criterion:
    name: str
    weight: float
    attributes: list[tuple[str, float]]


@dataclass
class EfficacyModel:
    criteria: list[Criterion]
    method: str = "saw"

    def __post_init__(self):
        if self.method not in ("saw", "ahp"):
            raise ConfigError("method must be 'saw' or 'ahp'")
        if not self.criteria:
            raise ConfigError("efficacy model needs at least one criterion")
        total = sum(c.weight for c in self.criteria)
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise ConfigError(f"criterion weights sum to {total}, expected 1")
        for c in self.criteria:
            if c.weight <= 0:
                raise ConfigError(f"criterion {c.name!r} has non-positive weight")
            if not c.attributes:
                raise ConfigError(f"criterion {c.name!r} has no attributes")
            asum = sum(w for _, w in c.attributes)
            if abs(asum - 1.0) > _WEIGHT_SUM_TOL:
                raise ConfigError(
                    f"attribute weights of {c.name!r} sum to {asum}, expected 1")
            if any(w <= 0 for _, w in c.attributes):
                raise ConfigError(f"criterion {c.name!r} has a non-positive attribute weight")

    def leaves(self) -> list[str]:
        return [f"{c.name}.{a}" for c in self.criteria for a, _ in c.attributes]


def _normalize_level(weights: dict[str, float]) -> dict[str, float]:
    total = sum(weights.values())
    if total <= 0:
        raise ConfigError("weights must be positive")
    return {k: w / total for k, w in weights.items()}


def efficacy_model_from_dict(tree: dict, method: str = "saw") -> EfficacyModel:
    """Build from the config-file shape
    {criterion: {"weight": w, "attributes": {name: w, ...}}, ...};
    weights are normalized per level."""
    if not isinstance(tree, dict) or not tree:
        raise ConfigError("efficacy tree must be a non-empty object")
    crit_weights = _normalize_level(
        {name: float(spec.get("weight", 1.0)) for name, spec in tree.items()})
    criteria = []
    for name, spec in tree.items():
        attrs = spec.get("attributes")
        if not isinstance(attrs, dict) or not attrs:
            raise ConfigError(f"criterion {name!r} needs an attributes object")
        attr_weights = _normalize_level({a: float(w) for a, w in attrs.items()})
        criteria.append(Criterion(
            name=name, weight=crit_weights[name],
            attributes=sorted(attr_weights.items()),
        ))
    criteria.sort(key=lambda c: c.name)
    return EfficacyModel(criteria=criteria, method=method)


def default_efficacy_model() -> EfficacyModel:
    text = resources.files("ideaforge.data").joinpath("efficacy_default.json").read_text("utf-8")
    return efficacy_model_from_dict(json.loads(text))


def load_efficacy_model(path, method: str = "saw") -> EfficacyModel:
    return efficacy_model_from_dict(load_json(path), method=method)


def _validate_rating(leaf: str, value: float) -> float:
    scaled = value * 10.0
    nearest = round(scaled)
    if not (1 <= nearest <= 10) or abs(scaled - nearest) > 1e-9:
        raise ConfigError(
            f"rating for {leaf!r} is {value}; ratings use the decile scale "
            f"0.1, 0.2, ..., 1.0")
    return nearest / 10.0


def saw_score(model: EfficacyModel, ratings: dict[str, float]) -> float:
    """Weighted-sum efficacy index over rated leaves: for each criterion,
    the weighted mean of its attribute ratings, combined by criterion
    weight. Every leaf must carry a decile-scale rating."""
    missing = [leaf for leaf in model.leaves() if leaf not in ratings]
    if missing:
        raise ConfigError(f"missing ratings for: {', '.join(missing)}")
    index = 0.0
    for c in model.criteria:
        inner = 0.0
        for attr, w in c.attributes:
            leaf = f"{c.name}.{attr}"
            inner += w * _validate_rating(leaf, ratings[leaf])
        index += c.weight * inner
    return index


@dataclass
class AhpResult:
    weights: np.ndarray
    lambda_max: float
    consistency_index: float
    consistency_ratio: float
    inconsistent: bool  # consistency ratio above the 0.1 guideline


def validate_pairwise_matrix(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError("pairwise matrix must be square")
    n = m.shape[0]
    if not (2 <= n <= 10):
        raise ConfigError("pairwise matrix size must be between 2 and 10")
    if np.any(m <= 0):
        raise ConfigError("pairwise matrix entries must be positive")
    if np.any(m > 9.0 + 1e-9) or np.any(m < 1.0 / 9.0 - 1e-9):
        raise ConfigError("pairwise entries must lie in [1/9, 9]")
    if np.any(np.abs(np.diag(m) - 1.0) > 1e-12):
        raise ConfigError("pairwise matrix diagonal must be 1")
    if np.any(np.abs(m * m.T - 1.0) > 1e-9):
        raise ConfigError("pairwise matrix must be reciprocal (a_ji = 1/a_ij)")
    return m


def ahp_weights(matrix, tol: float = 1e-10, max_iterations: int = 10000) -> AhpResult:
    """Principal-eigenvector weights by power iteration, with Saaty's
    consistency index/ratio."""
    m = validate_pairwise_matrix(matrix)
    n = m.shape[0]
    v = np.full(n, 1.0 / n)
    lam = 0.0
    for _ in range(max_iterations):
        w = m @ v
        lam_new = w.sum()  # v is L1-normalized, so sum(Av) estimates lambda
        w /= lam_new
        if np.max(np.abs(w - v)) < tol and abs(lam_new - lam) < tol:
            v, lam = w, lam_new
            break
        v, lam = w, lam_new
    else:
        raise DataError("power iteration did not converge")

    ci = (lam - n) / (n - 1)
    ri = RANDOM_INDEX[n - 1]
    cr = 0.0 if ri == 0.0 else ci / ri
    return AhpResult(weights=v, lambda_max=float(lam),
                     consistency_index=float(ci), consistency_ratio=float(cr),
                     inconsistent=cr > CR_WARNING_LIMIT)


def load_pairwise(path) -> np.ndarray:
    return validate_pairwise_matrix(np.asarray(load_json(path), dtype=np.float64))


def load_ratings(path) -> dict[str, dict[str, float]]:
    """Ratings file: {idea_id: {criterion.attribute: rating, ...}, ...}."""
    doc = load_json(path)
    if not isinstance(doc, dict):
        raise DataError(f"{path}: ratings file must be an object")
    return {str(idea): {str(k): float(v) for k, v in leafmap.items()}
            for idea, leafmap in doc.items()}


@dataclass
class ScoredIdea:
    topic: int
    idea_id: str
    index: float
    candidate: IdeaCandidate | None = None


@dataclass
class IdeaRanking:
    ranked: list[ScoredIdea]
    viable_count: int
    viable_percentage: float
    viability_threshold: float


def rank_ideas(scored: list[ScoredIdea], viability_threshold: float = 0.6) -> IdeaRanking:
    """Sort by efficacy index descending (ties by topic id) and summarize
    how many clear the viability threshold; an empty list gives 0%."""
    ranked = sorted(scored, key=lambda s: (-s.index, s.topic))
    viable = sum(1 for s in ranked if s.index >= viability_threshold)
    pct = 100.0 * viable / len(ranked) if ranked else 0.0
    return IdeaRanking(ranked=ranked, viable_count=viable,
                       viable_percentage=pct,
                       viability_threshold=viability_threshold)
