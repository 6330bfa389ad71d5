import numpy as np
import pytest

from ideaforge.burst import BurstInterval
from ideaforge.dynamics import DynamicsConfig, slice_topic_distributions
from ideaforge.errors import ConfigError, DataError
from ideaforge.ideation import (CandidateConfig, Criterion, EfficacyModel,
                                ScoredIdea, ahp_weights,
                                assemble_idea_candidates,
                                default_efficacy_model,
                                efficacy_model_from_dict, rank_ideas,
                                saw_score, validate_pairwise_matrix)
from ideaforge.trendlab import CorrelationResult, TrendFit


def fit(slope, p, term=""):
    return TrendFit(slope=slope, intercept=0.0, r_squared=0.5, t_stat=2.0,
                    p_value=p, n=10, dof=8, sigma2=0.1, label=term)


def interval(term, start, end, weight=1.0, ongoing=False):
    return BurstInterval(term=term, start_year=start, end_year=end,
                         weight=weight, ongoing=ongoing)


def corr(r, p):
    return CorrelationResult(r=r, t_stat=3.0, p_value=p, n=10)


class _FakeEvolution:
    """Just enough surface for candidate assembly."""

    def __init__(self, years, n_topics):
        self.years = years
        self.n_topics = n_topics


class TestAssembleCandidates:
    def _evolution(self):
        return _FakeEvolution(list(range(2010, 2020)), n_topics=2)

    def _labels(self):
        return {0: [("alpha", 0.4), ("beta", 0.3)],
                1: [("gamma", 0.5), ("delta", 0.2)]}

    def test_flat_topic_has_empty_lists(self):
        cands = assemble_idea_candidates(
            self._evolution(),
            trend_fits={0: {"alpha": fit(0.001, 0.9), "beta": fit(-0.001, 0.8)},
                        1: {}},
            bursts=[], correlations={}, cfg=CandidateConfig(),
            label_terms=self._labels())
        for c in cands:
            assert c.rising_terms == []
            assert c.falling_terms == []
            assert c.burst_terms == []
            assert c.correlated_pairs == []

    def test_planted_rising_term_detected(self):
        cands = assemble_idea_candidates(
            self._evolution(),
            trend_fits={0: {"alpha": fit(0.01, 0.002)}, 1: {}},
            bursts=[], correlations={}, cfg=CandidateConfig(),
            label_terms=self._labels())
        by_topic = {c.topic: c for c in cands}
        assert by_topic[0].rising_terms == [("alpha", 0.01, 0.002)]
        # rising topic sorts first
        assert cands[0].topic == 0

    def test_rising_and_falling_disjoint(self):
        cands = assemble_idea_candidates(
            self._evolution(),
            trend_fits={0: {"alpha": fit(0.01, 0.001), "beta": fit(-0.02, 0.001)},
                        1: {}},
            bursts=[], correlations={}, cfg=CandidateConfig(),
            label_terms=self._labels())
        c0 = {c.topic: c for c in cands}[0]
        rising = {t for t, _, _ in c0.rising_terms}
        falling = {t for t, _, _ in c0.falling_terms}
        assert rising == {"alpha"}
        assert falling == {"beta"}
        assert not (rising & falling)

    def test_burst_window_filter(self):
        bursts = [interval("alpha", 2011, 2012), interval("beta", 2018, 2019)]
        cands = assemble_idea_candidates(
            self._evolution(),
            trend_fits={0: {"alpha": fit(0.0, 1.0), "beta": fit(0.0, 1.0)}, 1: {}},
            bursts=bursts, correlations={},
            cfg=CandidateConfig(burst_window=3),
            label_terms=self._labels())
        c0 = {c.topic: c for c in cands}[0]
        assert [b.term for b in c0.burst_terms] == ["beta"]

    def test_correlation_thresholds(self):
        correlations = {0: [("alpha", "beta", corr(0.9, 0.001)),
                            ("alpha", "zeta", corr(0.3, 0.001)),
                            ("beta", "zeta", corr(0.9, 0.5))]}
        cands = assemble_idea_candidates(
            self._evolution(), trend_fits={0: {}, 1: {}}, bursts=[],
            correlations=correlations,
            cfg=CandidateConfig(r_min=0.5, p_threshold=0.05),
            label_terms=self._labels())
        c0 = {c.topic: c for c in cands}[0]
        assert c0.correlated_pairs == [("alpha", "beta", 0.9, 0.001)]

    def test_all_listed_pvalues_below_threshold(self):
        cands = assemble_idea_candidates(
            self._evolution(),
            trend_fits={0: {"alpha": fit(0.01, 0.04), "beta": fit(0.02, 0.06)},
                        1: {}},
            bursts=[], correlations={}, cfg=CandidateConfig(p_threshold=0.05),
            label_terms=self._labels())
        c0 = {c.topic: c for c in cands}[0]
        assert all(p < 0.05 for _, _, p in c0.rising_terms)
        assert {t for t, _, _ in c0.rising_terms} == {"alpha"}

    def test_ordering_by_rising_count(self):
        cands = assemble_idea_candidates(
            self._evolution(),
            trend_fits={0: {"alpha": fit(0.01, 0.01)},
                        1: {"gamma": fit(0.01, 0.01), "delta": fit(0.02, 0.01)}},
            bursts=[], correlations={}, cfg=CandidateConfig(),
            label_terms=self._labels())
        assert [c.topic for c in cands] == [1, 0]

    def test_statements_attached(self):
        cands = assemble_idea_candidates(
            self._evolution(), trend_fits={0: {}, 1: {}}, bursts=[],
            correlations={}, cfg=CandidateConfig(),
            label_terms=self._labels(),
            statements={1: ["explore gamma-delta sensor fusion"]})
        by_topic = {c.topic: c for c in cands}
        assert by_topic[1].statements == ["explore gamma-delta sensor fusion"]


class TestSawScore:
    def test_two_leaf_arithmetic(self):
        model = EfficacyModel(criteria=[
            Criterion("a", 0.5, [("x", 1.0)]),
            Criterion("b", 0.5, [("y", 1.0)]),
        ])
        assert saw_score(model, {"a.x": 0.4, "b.y": 0.8}) == pytest.approx(0.6, abs=1e-15)

    def test_all_ones_give_one(self):
        model = default_efficacy_model()
        ratings = {leaf: 1.0 for leaf in model.leaves()}
        assert saw_score(model, ratings) == pytest.approx(1.0, abs=1e-12)

    def test_missing_leaf_fatal_and_listed(self):
        model = default_efficacy_model()
        ratings = {leaf: 0.5 for leaf in model.leaves()}
        del ratings["technical.safety"]
        with pytest.raises(ConfigError, match="technical.safety"):
            saw_score(model, ratings)

    def test_off_scale_rating_fatal(self):
        model = default_efficacy_model()
        ratings = {leaf: 0.5 for leaf in model.leaves()}
        ratings["technical.safety"] = 0.55
        with pytest.raises(ConfigError, match="decile"):
            saw_score(model, ratings)
        ratings["technical.safety"] = 0.0
        with pytest.raises(ConfigError):
            saw_score(model, ratings)

    def test_brute_force_weighted_sum(self):
        rng = np.random.default_rng(23)
        tree = {}
        for c in range(5):
            attrs = {f"a{c}{i}": float(rng.integers(1, 9)) for i in range(int(rng.integers(2, 6)))}
            tree[f"c{c}"] = {"weight": float(rng.integers(1, 9)), "attributes": attrs}
        model = efficacy_model_from_dict(tree)
        ratings = {leaf: float(rng.integers(1, 11)) / 10 for leaf in model.leaves()}
        # oracle: direct two-level weighted sum over the normalized tree
        crit_total = sum(spec["weight"] for spec in tree.values())
        expected = 0.0
        for name, spec in tree.items():
            attr_total = sum(spec["attributes"].values())
            inner = sum(w / attr_total * ratings[f"{name}.{a}"]
                        for a, w in spec["attributes"].items())
            expected += spec["weight"] / crit_total * inner
        assert saw_score(model, ratings) == pytest.approx(expected, abs=1e-12)

    def test_monotone_in_any_rating(self):
        model = default_efficacy_model()
        ratings = {leaf: 0.5 for leaf in model.leaves()}
        base = saw_score(model, ratings)
        for leaf in model.leaves():
            bumped = dict(ratings)
            bumped[leaf] = 0.6
            assert saw_score(model, bumped) > base

    def test_bounded_by_min_max_ratings(self):
        rng = np.random.default_rng(29)
        model = default_efficacy_model()
        for _ in range(20):
            ratings = {leaf: float(rng.integers(1, 11)) / 10
                       for leaf in model.leaves()}
            score = saw_score(model, ratings)
            assert min(ratings.values()) - 1e-12 <= score <= max(ratings.values()) + 1e-12

    def test_weight_sum_invariant_enforced(self):
        with pytest.raises(ConfigError, match="sum"):
            EfficacyModel(criteria=[
                Criterion("a", 0.7, [("x", 1.0)]),
                Criterion("b", 0.5, [("y", 1.0)]),
            ])


def characteristic_polynomial_eigen(matrix: np.ndarray) -> float:
    """Oracle: dominant eigenvalue via Faddeev-LeVerrier coefficients and
    polynomial root finding - a route independent of power iteration."""
    n = matrix.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(matrix)
    for k in range(1, n + 1):
        m = matrix @ m + coeffs[-1] * np.eye(n)
        prod = matrix @ m
        coeffs.append(-np.trace(prod) / k)
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) < 1e-8].real
    return float(real.max())


class TestAhp:
    def test_all_ones_matrix(self):
        result = ahp_weights(np.ones((3, 3)))
        assert np.allclose(result.weights, 1 / 3, atol=1e-12)
        assert result.lambda_max == pytest.approx(3.0, abs=1e-10)
        assert result.consistency_ratio == pytest.approx(0.0, abs=1e-10)
        assert not result.inconsistent

    def test_consistent_matrix_recovers_weights(self):
        w = np.array([0.6, 0.3, 0.1])
        m = w[:, None] / w[None, :]
        result = ahp_weights(m)
        assert np.allclose(result.weights, w, atol=1e-8)
        assert result.consistency_ratio == pytest.approx(0.0, abs=1e-10)

    def test_random_consistent_matrices(self):
        rng = np.random.default_rng(31)
        for n in (3, 5, 8):
            for _ in range(5):
                w = rng.uniform(0.2, 1.0, size=n)
                w /= w.sum()
                m = w[:, None] / w[None, :]
                result = ahp_weights(m)
                assert np.allclose(result.weights, w, atol=1e-8)
                assert abs(result.consistency_ratio) <= 1e-10

    def test_scale_free(self):
        w = np.array([0.5, 0.3, 0.2])
        m = w[:, None] / w[None, :]
        m_scaled = (3.7 * w)[:, None] / (3.7 * w)[None, :]
        r1, r2 = ahp_weights(m), ahp_weights(m_scaled)
        assert np.allclose(r1.weights, r2.weights, atol=1e-12)

    def test_perturbed_matrix_against_characteristic_polynomial(self):
        m = np.array([
            [1.0, 2.0, 4.0, 3.0],
            [1 / 2, 1.0, 3.0, 2.0],
            [1 / 4, 1 / 3, 1.0, 1 / 2],
            [1 / 3, 1 / 2, 2.0, 1.0],
        ])
        result = ahp_weights(m)
        lam_oracle = characteristic_polynomial_eigen(m)
        assert result.lambda_max == pytest.approx(lam_oracle, abs=1e-8)
        n = 4
        ci = (lam_oracle - n) / (n - 1)
        assert result.consistency_index == pytest.approx(ci, abs=1e-8)
        assert result.consistency_ratio == pytest.approx(ci / 0.90, abs=1e-8)

    def test_inconsistency_warning(self):
        m = np.array([
            [1.0, 9.0, 1 / 9],
            [1 / 9, 1.0, 9.0],
            [9.0, 1 / 9, 1.0],
        ])
        result = ahp_weights(m)
        assert result.inconsistent

    def test_non_reciprocal_fatal(self):
        m = np.array([[1.0, 2.0], [0.4, 1.0]])
        with pytest.raises(ConfigError, match="reciprocal"):
            validate_pairwise_matrix(m)

    def test_non_positive_fatal(self):
        m = np.array([[1.0, -2.0], [-0.5, 1.0]])
        with pytest.raises(ConfigError):
            validate_pairwise_matrix(m)

    def test_entry_range_enforced(self):
        m = np.array([[1.0, 12.0], [1 / 12.0, 1.0]])
        with pytest.raises(ConfigError, match="1/9"):
            validate_pairwise_matrix(m)

    def test_size_bounds(self):
        with pytest.raises(ConfigError):
            validate_pairwise_matrix(np.ones((1, 1)))
        with pytest.raises(ConfigError):
            validate_pairwise_matrix(np.ones((11, 11)))


class TestRankIdeas:
    def test_threshold_summary(self):
        scored = [ScoredIdea(0, "topic-0", 0.9), ScoredIdea(1, "topic-1", 0.3)]
        ranking = rank_ideas(scored, viability_threshold=0.6)
        assert [s.idea_id for s in ranking.ranked] == ["topic-0", "topic-1"]
        assert ranking.viable_count == 1
        assert ranking.viable_percentage == pytest.approx(50.0)

    def test_empty_list(self):
        ranking = rank_ideas([])
        assert ranking.viable_count == 0
        assert ranking.viable_percentage == 0.0

    def test_random_sets_against_sort_oracle(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            scored = [ScoredIdea(int(rng.integers(0, 20)), f"i{j}",
                                 float(rng.integers(1, 11)) / 10)
                      for j in range(int(rng.integers(0, 15)))]
            ranking = rank_ideas(scored, viability_threshold=0.6)
            oracle = sorted(scored, key=lambda s: (-s.index, s.topic))
            assert [s.idea_id for s in ranking.ranked] == [s.idea_id for s in oracle]
            assert ranking.viable_count == sum(1 for s in scored if s.index >= 0.6)

    def test_tie_breaks_by_topic(self):
        scored = [ScoredIdea(5, "b", 0.7), ScoredIdea(1, "a", 0.7)]
        ranking = rank_ideas(scored)
        assert [s.idea_id for s in ranking.ranked] == ["a", "b"]


class TestDefaultTree:
    def test_five_criteria(self):
        model = default_efficacy_model()
        assert [c.name for c in model.criteria] == [
            "customer", "financial", "market", "social", "technical"]
        assert sum(c.weight for c in model.criteria) == pytest.approx(1.0, abs=1e-12)
        assert len(model.leaves()) == 20
