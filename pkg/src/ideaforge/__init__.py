"""ideaforge: idea mining over timestamped text corpora.

From a corpus of dated abstracts it builds topic models (collapsed-Gibbs
LDA), tracks per-year topic evolution, detects term bursts, runs trend and
correlation significance tests, assembles ranked idea candidates, and
scores human-rated ideas with a weighted-criteria efficacy index.
"""

__version__ = "0.1.0"

from .corpus import Corpus, Document, SliceIndex, dedupe, ingest_jsonl, \
    ingest_scopus_csv, slice_by_year
from .errors import ConfigError, DataError, IdeaForgeError
from .textprep import (BigramConfig, DocTermMatrix, TokenPipelineConfig,
                       Vocabulary, build_doc_term_matrix, build_vocabulary,
                       detect_and_merge_bigrams, preprocess_texts,
                       remove_stopwords, tfidf, tokenize)
from .topicmodel import (LdaHyper, TopicModel, fit_lda, perplexity,
                         sweep_topic_counts, top_terms, umass_coherence)
from .dynamics import (DynamicsConfig, TimeSeries, TopicEvolution,
                       chained_refit, slice_topic_distributions,
                       term_trajectory)
from .trendlab import (CorrelationResult, TrendFit, forecast, ols_fit,
                       pearson, student_t_sf)
from .burst import (BurstConfig, BurstInterval, BurstStream, burst_counts,
                    detect_bursts, rank_bursts)
from .ideation import (CandidateConfig, EfficacyModel, IdeaCandidate,
                       ahp_weights, assemble_idea_candidates, rank_ideas,
                       saw_score)
from .pipeline import Pipeline, RunConfig
