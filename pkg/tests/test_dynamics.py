import numpy as np
import pytest

from ideaforge.corpus import SliceIndex
from ideaforge.dynamics import (DynamicsConfig, TimeSeries, chained_refit,
                                load_evolution, save_evolution,
                                slice_topic_distributions, term_trajectory)
from ideaforge.errors import ConfigError, DataError
from ideaforge.topicmodel import LdaHyper, fit_lda

from test_topicmodel import make_dtm


def slice_index(years, slices, excluded=0):
    return SliceIndex(years=list(years), slices=[list(s) for s in slices],
                      year_min=years[0], year_max=years[-1], excluded=excluded)


def small_fit(dtm, n_topics=2, seed=42, alpha=None):
    hyper = LdaHyper(n_topics=n_topics, seed=seed, alpha=alpha,
                     iterations=40, burn_in=20, sample_lag=4)
    return fit_lda(dtm, hyper, with_diagnostics=False)


def three_slice_setup():
    rows = [
        {0: 2, 1: 1}, {1: 1, 2: 2},          # year 0
        {0: 1, 2: 1, 3: 1}, {3: 2},          # year 1
        {1: 2, 4: 1},                        # year 2
    ]
    dtm = make_dtm(rows, n_terms=5)
    slices = slice_index([2010, 2011, 2012], [[0, 1], [2, 3], [4]])
    return dtm, slices


class TestSliceConditional:
    def test_single_slice_reproduces_global_phi_bitwise(self):
        dtm, _ = three_slice_setup()
        model = small_fit(dtm)
        slices = slice_index([2010], [list(range(dtm.n_docs))])
        evo = slice_topic_distributions(model, slices)
        assert np.array_equal(evo.phi_t[0], model.phi)

    def test_rows_normalized(self):
        dtm, slices = three_slice_setup()
        model = small_fit(dtm)
        evo = slice_topic_distributions(model, slices)
        sums = evo.phi_t.sum(axis=2)
        assert np.allclose(sums, 1.0, atol=1e-9)
        assert np.all(evo.phi_t > 0)

    def test_pooling_identity_exact(self):
        dtm, slices = three_slice_setup()
        model = small_fit(dtm, n_topics=3)
        evo = slice_topic_distributions(model, slices)
        pooled = evo.counts_tkw_total.sum(axis=0)
        assert np.array_equal(pooled, model.sample_nkw_total)

    def test_empty_cell_uniform(self):
        # a slice with no documents at all: every (t, k) there is uniform
        dtm, _ = three_slice_setup()
        model = small_fit(dtm)
        slices = slice_index([2010, 2011], [list(range(dtm.n_docs)), []])
        evo = slice_topic_distributions(model, slices)
        assert np.allclose(evo.phi_t[1], 1.0 / dtm.n_terms, atol=1e-12)
        assert (1, 0) in evo.empty_cells()
        assert (1, 1) in evo.empty_cells()

    def test_unknown_document_fatal(self):
        dtm, _ = three_slice_setup()
        model = small_fit(dtm)
        slices = slice_index([2010], [[0, 99]])
        with pytest.raises(DataError, match="unknown document"):
            slice_topic_distributions(model, slices)

    def test_excluded_documents_do_not_count(self):
        dtm, _ = three_slice_setup()
        model = small_fit(dtm)
        # document 4 belongs to no slice
        slices = slice_index([2010, 2011], [[0, 1], [2, 3]])
        evo = slice_topic_distributions(model, slices)
        doc4_tokens = 3  # {1: 2, 4: 1}
        assert int(evo.counts_tkw_total.sum()) == \
            (dtm.total_tokens - doc4_tokens) * evo.sample_count


class TestChainedRefit:
    def test_eta_zero_equals_independent_fits_bitwise(self):
        dtm, slices = three_slice_setup()
        hyper = LdaHyper(n_topics=2, seed=7, iterations=40, burn_in=20,
                         sample_lag=4)
        cfg = DynamicsConfig(mode="chained_prior", eta=0.0)
        evo = chained_refit(dtm, slices, hyper, cfg)
        from ideaforge.dynamics import _sub_matrix
        for t, doc_ids in enumerate(slices.slices):
            sub = _sub_matrix(dtm, doc_ids)
            h_t = LdaHyper(n_topics=2, seed=int(np.uint64(7) ^ np.uint64(t)),
                           iterations=40, burn_in=20, sample_lag=4)
            independent = fit_lda(sub, h_t, with_diagnostics=False)
            assert np.array_equal(evo.phi_t[t], independent.phi)

    def test_empty_slice_is_normalized_prior(self):
        dtm, _ = three_slice_setup()
        slices = slice_index([2010, 2011], [list(range(dtm.n_docs)), []])
        hyper = LdaHyper(n_topics=2, seed=3, iterations=40, burn_in=20,
                         sample_lag=4)
        cfg = DynamicsConfig(mode="chained_prior", eta=0.5)
        evo = chained_refit(dtm, slices, hyper, cfg)
        prior_mass = cfg.resolved_prior_mass(hyper.beta, dtm.n_terms)
        beta_kw = hyper.beta + cfg.eta * prior_mass * evo.phi_t[0]
        expected = beta_kw / beta_kw.sum(axis=1, keepdims=True)
        assert np.array_equal(evo.phi_t[1], expected)

    def test_large_eta_empty_slice_bound(self):
        dtm, _ = three_slice_setup()
        slices = slice_index([2010, 2011], [list(range(dtm.n_docs)), []])
        hyper = LdaHyper(n_topics=2, seed=3, iterations=40, burn_in=20,
                         sample_lag=4)
        cfg = DynamicsConfig(mode="chained_prior", eta=100.0)
        evo = chained_refit(dtm, slices, hyper, cfg)
        prior_mass = cfg.resolved_prior_mass(hyper.beta, dtm.n_terms)
        gap = np.max(np.abs(evo.phi_t[1] - evo.phi_t[0]))
        assert gap <= 1.0 / (cfg.eta * prior_mass) + 1e-15

    def test_mode_guard(self):
        dtm, slices = three_slice_setup()
        hyper = LdaHyper(n_topics=2, seed=1, iterations=40, burn_in=20,
                         sample_lag=4)
        with pytest.raises(ConfigError):
            chained_refit(dtm, slices, hyper, DynamicsConfig())


class TestTermTrajectory:
    def _evolution(self):
        # K=1 keeps per-slice counts deterministic: phi is just the
        # smoothed count ratio, so planted drift is exactly monotone
        rows = [
            {0: 1, 1: 5}, {0: 2, 1: 4}, {0: 4, 1: 2}, {0: 6, 1: 0},
        ]
        rows = [{k: v for k, v in r.items() if v} for r in rows]
        dtm = make_dtm(rows, n_terms=3)
        model = small_fit(dtm, n_topics=1)
        model.terms = ["rising", "falling", "absent"]
        slices = slice_index([2010, 2011, 2012, 2013], [[0], [1], [2], [3]])
        return slice_topic_distributions(model, slices)

    def test_point_count(self):
        evo = self._evolution()
        series = term_trajectory(evo, 0, "rising")
        assert len(series) == 4
        assert series.years == [2010, 2011, 2012, 2013]

    def test_planted_drift_strictly_increasing(self):
        evo = self._evolution()
        series = term_trajectory(evo, 0, "rising")
        assert all(b > a for a, b in zip(series.values, series.values[1:]))

    def test_absent_term_gets_positive_floor(self):
        evo = self._evolution()
        series = term_trajectory(evo, 0, "absent")
        assert all(v > 0 for v in series.values)
        beta = evo.smoothing_beta
        for t, v in enumerate(series.values):
            n_t = evo.counts_tkw_total[t, 0].sum() / evo.sample_count
            assert v == pytest.approx(beta / (n_t + 3 * beta), rel=1e-9)

    def test_unknown_term_fatal_with_suggestions(self):
        evo = self._evolution()
        with pytest.raises(DataError, match="rising"):
            term_trajectory(evo, 0, "risin")

    def test_topic_bounds(self):
        evo = self._evolution()
        with pytest.raises(ConfigError):
            term_trajectory(evo, 5, "rising")


class TestTimeSeries:
    def test_years_strictly_increasing(self):
        with pytest.raises(ConfigError):
            TimeSeries(years=[2010, 2010], values=[1.0, 2.0])

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            TimeSeries(years=[2010], values=[1.0, 2.0])


class TestEvolutionPersistence:
    def test_roundtrip_slice_conditional(self, tmp_path):
        dtm, slices = three_slice_setup()
        model = small_fit(dtm, n_topics=2)
        model.terms = [f"t{v}" for v in range(dtm.n_terms)]
        evo = slice_topic_distributions(model, slices)
        path = tmp_path / "evolution.json"
        save_evolution(evo, path)
        loaded = load_evolution(path, terms=model.terms)
        # zero-count cells reconstruct from the stored floor exactly;
        # everything else within the canonical 12-significant-digit round
        assert np.allclose(loaded.phi_t, evo.phi_t, rtol=1e-10, atol=1e-6)
        assert loaded.years == evo.years
        assert loaded.mode == "slice_conditional"

    def test_roundtrip_preserves_trajectories(self, tmp_path):
        dtm, slices = three_slice_setup()
        model = small_fit(dtm, n_topics=2)
        model.terms = [f"t{v}" for v in range(dtm.n_terms)]
        evo = slice_topic_distributions(model, slices)
        path = tmp_path / "evolution.json"
        save_evolution(evo, path)
        loaded = load_evolution(path, terms=model.terms)
        for k in range(2):
            for term in model.terms:
                a = term_trajectory(evo, k, term)
                b = term_trajectory(loaded, k, term)
                assert np.allclose(a.values, b.values, rtol=1e-10, atol=1e-6)
