"""Staged pipeline: ingest -> prep -> [sweep] -> fit -> evolve -> bursts ->
trends -> ideas -> report.

Every stage writes its artifacts under <output_dir>/<stage>/ and records
their content hashes in manifest.json. A stage whose configuration
projection and upstream artifact hashes are unchanged is skipped on rerun
(unless forced); a stage whose prerequisites are missing or stale fails
fatally, naming the stage to run first. All cross-stage communication goes
through the files, so any stage can be rerun in a fresh process.

report.json and the model artifacts are canonical JSON and therefore
byte-stable across identical runs; the manifest carries the only
timestamps.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__ as TOOL_VERSION
from . import burst as burst_mod
from . import svgchart
from .canonical import (canonical_json, load_json, sha256_file, sha256_text,
                        write_canonical_json)
from .corpus import (Corpus, SliceIndex, dedupe, ingest_jsonl,
                     ingest_scopus_csv, serialize_jsonl, slice_by_year)
from .dynamics import (DynamicsConfig, TimeSeries, TopicEvolution,
                       chained_refit, load_evolution, save_evolution,
                       slice_topic_distributions, term_trajectory)
from .errors import ConfigError, DataError
from .ideation import (CandidateConfig, ScoredIdea, assemble_idea_candidates,
                       default_efficacy_model, load_efficacy_model,
                       load_ratings, rank_ideas, saw_score)
from .textprep import (BigramConfig, DocTermMatrix, TokenPipelineConfig,
                       Vocabulary, build_doc_term_matrix, build_vocabulary,
                       detect_and_merge_bigrams, load_pairs_file,
                       load_wordlist_file, preprocess_texts,
                       term_frequency_report)
from .topicmodel import (LdaHyper, TopicModel, fit_lda, load_model,
                         save_model, sweep_topic_counts, top_terms)
from .trendlab import TrendFit, forecast, ols_fit, pearson

OUTPUT_DIR_ENV = "IDEAFORGE_OUT"
REPORT_SCHEMA_VERSION = 1

_STAGE_ORDER = ("ingest", "prep", "sweep", "fit", "evolve", "bursts",
                "trends", "ideas", "report")


def _require_keys(raw: dict, allowed: set[str], where: str):
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


@dataclass
class InputConfig:
    path: str
    format: str = "jsonl"  # jsonl | scopus_csv
    column_map: dict[str, str] | None = None
    use_title: bool = False

    def __post_init__(self):
        if self.format not in ("jsonl", "scopus_csv"):
            raise ConfigError(f"unknown input format {self.format!r}")


@dataclass
class VocabConfig:
    min_df: int = 5
    max_df_ratio: float = 0.5
    max_terms: int = 50000

    def __post_init__(self):
        if self.min_df < 1 or not (0 < self.max_df_ratio <= 1) or self.max_terms < 1:
            raise ConfigError("invalid vocabulary pruning parameters")


@dataclass
class SweepConfig:
    enabled: bool = False
    grid: list[int] = field(default_factory=lambda: [5, 10, 15, 20, 25, 30])
    select_by: str = "coherence"

    def __post_init__(self):
        if self.enabled and not self.grid:
            raise ConfigError("sweep.grid must be non-empty when enabled")
        if self.select_by not in ("coherence", "perplexity"):
            raise ConfigError("sweep.select_by must be 'coherence' or 'perplexity'")


@dataclass
class TrendsConfig:
    forecast_horizon: int = 3

    def __post_init__(self):
        if self.forecast_horizon < 0:
            raise ConfigError("forecast_horizon must be >= 0")


@dataclass
class EfficacyConfig:
    tree_path: str | None = None
    ratings_path: str | None = None
    viability_threshold: float = 0.6

    def __post_init__(self):
        if not (0 < self.viability_threshold <= 1):
            raise ConfigError("viability_threshold must lie in (0, 1]")


@dataclass
class RunConfig:
    """Validated run configuration; every nested block checks its own
    invariants on construction, before any stage runs."""

    input: InputConfig
    year_min: int
    year_max: int
    seed: int
    output_dir: str
    goal: str = ""
    source_descriptor: str = ""
    tokens: TokenPipelineConfig = field(default_factory=TokenPipelineConfig)
    stopwords_extra_path: str | None = None
    lemma_overrides_path: str | None = None
    bigrams_enabled: bool = True
    bigrams: BigramConfig = field(default_factory=BigramConfig)
    vocab: VocabConfig = field(default_factory=VocabConfig)
    lda: LdaHyper | None = None
    sweep: SweepConfig = field(default_factory=SweepConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    burst: burst_mod.BurstConfig = field(default_factory=burst_mod.BurstConfig)
    candidates: CandidateConfig = field(default_factory=CandidateConfig)
    trends: TrendsConfig = field(default_factory=TrendsConfig)
    efficacy: EfficacyConfig = field(default_factory=EfficacyConfig)
    statements: dict[int, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        if self.year_min > self.year_max:
            raise ConfigError(f"years.min {self.year_min} > years.max {self.year_max}")

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "RunConfig":
        _require_keys(raw, {
            "goal", "source_descriptor", "input", "years", "tokens", "bigrams",
            "vocab", "lda", "seed", "sweep", "dynamics", "burst", "candidates",
            "trends", "efficacy", "statements", "output_dir",
        }, "run config")
        for key in ("input", "years", "seed", "output_dir"):
            if key not in raw:
                raise ConfigError(f"run config is missing required key {key!r}")

        def resolve(p):
            if p is None:
                return None
            p = Path(p)
            return str(p if p.is_absolute() or base_dir is None else base_dir / p)

        inp = dict(raw["input"])
        _require_keys(inp, {"path", "format", "column_map", "use_title"}, "input")
        inp["path"] = resolve(inp["path"])
        years = raw["years"]
        _require_keys(dict(years), {"min", "max"}, "years")

        tokens_raw = dict(raw.get("tokens", {}))
        _require_keys(tokens_raw, {"min_token_len", "drop_numeric", "stopwords_extra",
                                   "stopwords_extra_path", "lemma_overrides",
                                   "lemma_overrides_path", "british_to_us",
                                   "use_stemmer"}, "tokens")
        stop_path = resolve(tokens_raw.pop("stopwords_extra_path", None))
        lemma_path = resolve(tokens_raw.pop("lemma_overrides_path", None))
        tokens_raw["stopwords_extra"] = frozenset(tokens_raw.get("stopwords_extra", []))

        bigrams_raw = dict(raw.get("bigrams", {}))
        _require_keys(bigrams_raw, {"enabled", "min_pair_count", "npmi_threshold",
                                    "joiner"}, "bigrams")
        bigrams_enabled = bool(bigrams_raw.pop("enabled", True))

        lda_raw = dict(raw.get("lda", {}))
        _require_keys(lda_raw, {"n_topics", "alpha", "beta", "iterations",
                                "burn_in", "sample_lag"}, "lda")
        lda = LdaHyper(seed=int(raw["seed"]),
                       n_topics=int(lda_raw.pop("n_topics", 10)), **lda_raw)

        eff_raw = dict(raw.get("efficacy", {}))
        _require_keys(eff_raw, {"tree_path", "ratings_path",
                                "viability_threshold"}, "efficacy")
        eff_raw["tree_path"] = resolve(eff_raw.get("tree_path"))
        eff_raw["ratings_path"] = resolve(eff_raw.get("ratings_path"))

        statements = {int(k): [str(s) for s in v]
                      for k, v in raw.get("statements", {}).items()}

        return cls(
            input=InputConfig(**inp),
            year_min=int(years["min"]), year_max=int(years["max"]),
            seed=int(raw["seed"]),
            output_dir=resolve(raw["output_dir"]),
            goal=str(raw.get("goal", "")),
            source_descriptor=str(raw.get("source_descriptor", "")),
            tokens=TokenPipelineConfig(**tokens_raw),
            stopwords_extra_path=stop_path,
            lemma_overrides_path=lemma_path,
            bigrams_enabled=bigrams_enabled,
            bigrams=BigramConfig(**bigrams_raw),
            vocab=VocabConfig(**raw.get("vocab", {})),
            lda=lda,
            sweep=SweepConfig(**raw.get("sweep", {})),
            dynamics=DynamicsConfig(**raw.get("dynamics", {})),
            burst=burst_mod.BurstConfig(**raw.get("burst", {})),
            candidates=CandidateConfig(**raw.get("candidates", {})),
            trends=TrendsConfig(**raw.get("trends", {})),
            efficacy=EfficacyConfig(**eff_raw),
            statements=statements,
        )

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        raw = load_json(path)
        return cls.from_dict(raw, base_dir=Path(path).resolve().parent)

    # -- projections: the config subset each stage's behaviour depends on --

    def _tokens_dict(self) -> dict:
        return {
            "min_token_len": self.tokens.min_token_len,
            "drop_numeric": self.tokens.drop_numeric,
            "stopwords_extra": sorted(self.tokens.stopwords_extra),
            "lemma_overrides": dict(sorted(self.tokens.lemma_overrides.items())),
            "british_to_us": self.tokens.british_to_us,
            "use_stemmer": self.tokens.use_stemmer,
            "stopwords_extra_path": self.stopwords_extra_path,
            "lemma_overrides_path": self.lemma_overrides_path,
        }

    def _lda_dict(self) -> dict:
        return self.lda.to_dict()

    def stage_projection(self, stage: str) -> dict:
        p: dict = {}
        if stage == "ingest":
            p = {"input": {"path": self.input.path, "format": self.input.format,
                           "column_map": self.input.column_map},
                 "years": [self.year_min, self.year_max],
                 "source_descriptor": self.source_descriptor}
        elif stage == "prep":
            p = {"use_title": self.input.use_title,
                 "tokens": self._tokens_dict(),
                 "bigrams_enabled": self.bigrams_enabled,
                 "bigrams": {"min_pair_count": self.bigrams.min_pair_count,
                             "npmi_threshold": self.bigrams.npmi_threshold,
                             "joiner": self.bigrams.joiner},
                 "vocab": {"min_df": self.vocab.min_df,
                           "max_df_ratio": self.vocab.max_df_ratio,
                           "max_terms": self.vocab.max_terms}}
        elif stage == "sweep":
            p = {"lda": self._lda_dict(), "grid": self.sweep.grid,
                 "select_by": self.sweep.select_by}
        elif stage == "fit":
            p = {"lda": self._lda_dict(), "sweep_enabled": self.sweep.enabled}
        elif stage == "evolve":
            p = {"mode": self.dynamics.mode, "eta": self.dynamics.eta,
                 "prior_mass": self.dynamics.prior_mass}
        elif stage == "bursts":
            p = {"rate_ratio": self.burst.rate_ratio, "gamma": self.burst.gamma}
        elif stage == "trends":
            p = {"trend_top": self.candidates.trend_top,
                 "forecast_horizon": self.trends.forecast_horizon}
        elif stage == "ideas":
            p = {"candidates": {"p_threshold": self.candidates.p_threshold,
                                "r_min": self.candidates.r_min,
                                "burst_window": self.candidates.burst_window,
                                "trend_top": self.candidates.trend_top},
                 "efficacy": {"tree_path": self.efficacy.tree_path,
                              "ratings_path": self.efficacy.ratings_path,
                              "viability_threshold": self.efficacy.viability_threshold},
                 "statements": {str(k): v for k, v in sorted(self.statements.items())}}
        elif stage == "report":
            p = {"goal": self.goal, "source_descriptor": self.source_descriptor,
                 "echo": self.echo_dict()}
        else:
            raise ConfigError(f"unknown stage {stage!r}")
        return p

    def echo_dict(self) -> dict:
        """Config echo for the report: analytic settings only (no output
        directory, so reports from identical runs in different directories
        stay byte-identical)."""
        return {
            "goal": self.goal,
            "source_descriptor": self.source_descriptor,
            "input": {"path": self.input.path, "format": self.input.format,
                      "use_title": self.input.use_title},
            "years": {"min": self.year_min, "max": self.year_max},
            "seed": self.seed,
            "tokens": self._tokens_dict(),
            "bigrams_enabled": self.bigrams_enabled,
            "bigrams": {"min_pair_count": self.bigrams.min_pair_count,
                        "npmi_threshold": self.bigrams.npmi_threshold,
                        "joiner": self.bigrams.joiner},
            "vocab": {"min_df": self.vocab.min_df,
                      "max_df_ratio": self.vocab.max_df_ratio,
                      "max_terms": self.vocab.max_terms},
            "lda": self._lda_dict(),
            "sweep": {"enabled": self.sweep.enabled, "grid": self.sweep.grid,
                      "select_by": self.sweep.select_by},
            "dynamics": {"mode": self.dynamics.mode, "eta": self.dynamics.eta,
                         "prior_mass": self.dynamics.prior_mass},
            "burst": {"rate_ratio": self.burst.rate_ratio,
                      "gamma": self.burst.gamma},
            "candidates": {"p_threshold": self.candidates.p_threshold,
                           "r_min": self.candidates.r_min,
                           "burst_window": self.candidates.burst_window,
                           "trend_top": self.candidates.trend_top},
            "trends": {"forecast_horizon": self.trends.forecast_horizon},
            "efficacy": {"tree_path": self.efficacy.tree_path,
                         "ratings_path": self.efficacy.ratings_path,
                         "viability_threshold": self.efficacy.viability_threshold},
        }


@dataclass
class StageStatus:
    stage: str
    ran: bool  # False when skipped because inputs were unchanged


class Pipeline:
    def __init__(self, config: RunConfig, output_dir: str | None = None):
        self.config = config
        out = output_dir or os.environ.get(OUTPUT_DIR_ENV) or config.output_dir
        self.out = Path(out)
        self.manifest_path = self.out / "manifest.json"
        self.lock_path = self.out / "run.lock"

    # -- manifest -------------------------------------------------------

    def _load_manifest(self) -> dict:
        if self.manifest_path.exists():
            return load_json(self.manifest_path)
        return {"tool_version": TOOL_VERSION,
                "config_hash": sha256_text(canonical_json(self.config.echo_dict())),
                "stages": {}}

    def _save_manifest(self, manifest: dict):
        manifest["tool_version"] = TOOL_VERSION
        manifest["config_hash"] = sha256_text(canonical_json(self.config.echo_dict()))
        write_canonical_json(manifest, self.manifest_path)

    def active_stages(self) -> list[str]:
        stages = list(_STAGE_ORDER)
        if not self.config.sweep.enabled:
            stages.remove("sweep")
        return stages

    def _artifact(self, stage: str, name: str) -> Path:
        return self.out / stage / name

    def _require(self, manifest: dict, needed: list[tuple[str, str]]) -> dict[str, str]:
        """Check required artifacts exist and are unchanged; returns their
        hashes keyed by '<stage>/<name>'."""
        hashes = {}
        for stage, name in needed:
            entry = manifest["stages"].get(stage)
            if entry is None:
                raise DataError(f"stage {stage!r} has not run; run it first")
            rel = f"{stage}/{name}"
            recorded = entry["artifacts"].get(rel)
            path = self.out / rel
            if recorded is None or not path.exists():
                raise DataError(f"missing artifact {rel}; rerun stage {stage!r}")
            actual = sha256_file(path)
            if actual != recorded:
                raise DataError(f"stale artifact {rel}: file changed since "
                                f"stage {stage!r} ran (rerun it)")
            hashes[rel] = actual
        return hashes

    def _input_hash(self, stage: str, upstream: dict[str, str],
                    extra_files: dict[str, str] | None = None) -> str:
        payload = {"config": self.config.stage_projection(stage),
                   "upstream": upstream, "tool_version": TOOL_VERSION}
        if extra_files:
            payload["files"] = extra_files
        return sha256_text(canonical_json(payload))

    # -- public API ------------------------------------------------------

    def run_stage(self, stage: str, force: bool = False) -> StageStatus:
        if stage not in _STAGE_ORDER:
            raise ConfigError(f"unknown stage {stage!r}; stages are "
                              f"{', '.join(_STAGE_ORDER)}")
        if stage == "sweep" and not self.config.sweep.enabled:
            raise ConfigError("the sweep stage is disabled in this config")
        self.out.mkdir(parents=True, exist_ok=True)
        manifest = self._load_manifest()
        runner = getattr(self, f"_stage_{stage}")
        status = runner(manifest, force)
        self._save_manifest(manifest)
        return status

    def run_all(self, force: bool = False) -> list[StageStatus]:
        self.out.mkdir(parents=True, exist_ok=True)
        self._acquire_lock()
        try:
            return [self.run_stage(s, force=force) for s in self.active_stages()]
        finally:
            self._release_lock()

    def _acquire_lock(self):
        try:
            fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise DataError(
                f"another run owns {self.out} (run.lock present; delete it if "
                f"the previous run crashed)") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))

    def _release_lock(self):
        try:
            self.lock_path.unlink()
        except FileNotFoundError:
            pass

    def _finish(self, manifest: dict, stage: str, input_hash: str,
                files: list[Path]) -> StageStatus:
        artifacts = {}
        for path in files:
            rel = path.relative_to(self.out).as_posix()
            artifacts[rel] = sha256_file(path)
        manifest["stages"][stage] = {
            "input_hash": input_hash,
            "completed_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "artifacts": artifacts,
        }
        return StageStatus(stage=stage, ran=True)

    def _fresh(self, manifest: dict, stage: str, input_hash: str) -> bool:
        entry = manifest["stages"].get(stage)
        if entry is None or entry["input_hash"] != input_hash:
            return False
        for rel, recorded in entry["artifacts"].items():
            path = self.out / rel
            if not path.exists() or sha256_file(path) != recorded:
                return False
        return True

    # -- stages ----------------------------------------------------------

    def _stage_ingest(self, manifest: dict, force: bool) -> StageStatus:
        cfg = self.config
        if not Path(cfg.input.path).exists():
            raise DataError(f"input file not found: {cfg.input.path}")
        input_hash = self._input_hash(
            "ingest", {}, {"input": sha256_file(cfg.input.path)})
        if not force and self._fresh(manifest, "ingest", input_hash):
            return StageStatus("ingest", ran=False)

        if cfg.input.format == "jsonl":
            corpus, report = ingest_jsonl(cfg.input.path,
                                          cfg.source_descriptor or cfg.input.path)
        else:
            corpus, report = ingest_scopus_csv(cfg.input.path, cfg.input.column_map,
                                               cfg.source_descriptor or cfg.input.path)
        deduped, dd_report = dedupe(corpus)
        slices = slice_by_year(deduped, cfg.year_min, cfg.year_max)

        stage_dir = self.out / "ingest"
        stage_dir.mkdir(parents=True, exist_ok=True)
        serialize_jsonl(deduped, stage_dir / "corpus.jsonl")
        write_canonical_json(report.to_dict(), stage_dir / "ingest_report.json")
        write_canonical_json(dd_report.to_dict(), stage_dir / "dedupe_report.json")
        write_canonical_json({
            "year_min": slices.year_min, "year_max": slices.year_max,
            "years": slices.years, "slices": slices.slices,
            "excluded": slices.excluded,
        }, stage_dir / "slices.json")
        return self._finish(manifest, "ingest", input_hash, [
            stage_dir / "corpus.jsonl", stage_dir / "ingest_report.json",
            stage_dir / "dedupe_report.json", stage_dir / "slices.json"])

    def _load_corpus(self) -> Corpus:
        corpus, _ = ingest_jsonl(self._artifact("ingest", "corpus.jsonl"),
                                 self.config.source_descriptor)
        return corpus

    def _load_slices(self) -> SliceIndex:
        doc = load_json(self._artifact("ingest", "slices.json"))
        return SliceIndex(years=doc["years"], slices=doc["slices"],
                          year_min=doc["year_min"], year_max=doc["year_max"],
                          excluded=doc["excluded"])

    def _token_config(self) -> TokenPipelineConfig:
        cfg = self.config
        extra = set(cfg.tokens.stopwords_extra)
        if cfg.stopwords_extra_path:
            extra |= load_wordlist_file(cfg.stopwords_extra_path)
        lemma = dict(cfg.tokens.lemma_overrides)
        if cfg.lemma_overrides_path:
            lemma.update(load_pairs_file(cfg.lemma_overrides_path))
        return TokenPipelineConfig(
            min_token_len=cfg.tokens.min_token_len,
            drop_numeric=cfg.tokens.drop_numeric,
            stopwords_extra=frozenset(extra),
            lemma_overrides=lemma,
            british_to_us=cfg.tokens.british_to_us,
            use_stemmer=cfg.tokens.use_stemmer,
        )

    def _stage_prep(self, manifest: dict, force: bool) -> StageStatus:
        cfg = self.config
        upstream = self._require(manifest, [("ingest", "corpus.jsonl")])
        extra_files = {}
        if cfg.stopwords_extra_path:
            extra_files["stopwords_extra"] = sha256_file(cfg.stopwords_extra_path)
        if cfg.lemma_overrides_path:
            extra_files["lemma_overrides"] = sha256_file(cfg.lemma_overrides_path)
        input_hash = self._input_hash("prep", upstream, extra_files or None)
        if not force and self._fresh(manifest, "prep", input_hash):
            return StageStatus("prep", ran=False)

        corpus = self._load_corpus()
        texts = [doc.text(cfg.input.use_title) for doc in corpus]
        token_docs = preprocess_texts(texts, self._token_config())
        if cfg.bigrams_enabled:
            token_docs, collocations = detect_and_merge_bigrams(token_docs, cfg.bigrams)
        else:
            collocations = []
        vocab = build_vocabulary(token_docs, cfg.vocab.min_df,
                                 cfg.vocab.max_df_ratio, cfg.vocab.max_terms)
        dtm = build_doc_term_matrix(token_docs, vocab)
        report = term_frequency_report(dtm, vocab, top_n=min(100, len(vocab)))

        stage_dir = self.out / "prep"
        stage_dir.mkdir(parents=True, exist_ok=True)
        write_canonical_json({"documents": token_docs}, stage_dir / "tokens.json")
        write_canonical_json({
            "collocations": [{"left": c.left, "right": c.right, "merged": c.merged,
                              "count": c.count, "npmi": c.npmi}
                             for c in collocations],
        }, stage_dir / "collocations.json")
        write_canonical_json({
            "terms": vocab.terms, "df": vocab.df, "n_docs": vocab.n_docs,
        }, stage_dir / "vocab.json")
        write_canonical_json({
            "n_terms": dtm.n_terms,
            "docs": [[idx, cnt] for idx, cnt in zip(dtm.doc_indices, dtm.doc_counts)],
            "empty_docs": dtm.empty_docs,
        }, stage_dir / "dtm.json")
        write_canonical_json({"top_terms": report}, stage_dir / "term_report.json")
        return self._finish(manifest, "prep", input_hash, [
            stage_dir / "tokens.json", stage_dir / "collocations.json",
            stage_dir / "vocab.json", stage_dir / "dtm.json",
            stage_dir / "term_report.json"])

    def _load_vocab(self) -> Vocabulary:
        doc = load_json(self._artifact("prep", "vocab.json"))
        return Vocabulary(terms=doc["terms"],
                          df=np.asarray(doc["df"], dtype=np.int64),
                          n_docs=doc["n_docs"])

    def _load_dtm(self) -> DocTermMatrix:
        doc = load_json(self._artifact("prep", "dtm.json"))
        return DocTermMatrix(
            doc_indices=[np.asarray(i, dtype=np.int32) for i, _ in doc["docs"]],
            doc_counts=[np.asarray(c, dtype=np.int64) for _, c in doc["docs"]],
            n_terms=doc["n_terms"], empty_docs=doc["empty_docs"])

    def _stage_sweep(self, manifest: dict, force: bool) -> StageStatus:
        cfg = self.config
        upstream = self._require(manifest, [("prep", "dtm.json"), ("prep", "vocab.json")])
        input_hash = self._input_hash("sweep", upstream)
        if not force and self._fresh(manifest, "sweep", input_hash):
            return StageStatus("sweep", ran=False)

        dtm = self._load_dtm()
        vocab = self._load_vocab()
        result = sweep_topic_counts(dtm, cfg.sweep.grid, cfg.lda, seed=cfg.seed,
                                    select_by=cfg.sweep.select_by, terms=vocab.terms)
        stage_dir = self.out / "sweep"
        stage_dir.mkdir(parents=True, exist_ok=True)
        write_canonical_json(result.to_dict(), stage_dir / "sweep.json")
        return self._finish(manifest, "sweep", input_hash, [stage_dir / "sweep.json"])

    def _selected_topics(self, manifest: dict) -> int:
        if self.config.sweep.enabled:
            sweep = load_json(self._artifact("sweep", "sweep.json"))
            return int(sweep["selected"])
        return self.config.lda.n_topics

    def _stage_fit(self, manifest: dict, force: bool) -> StageStatus:
        cfg = self.config
        needed = [("prep", "dtm.json"), ("prep", "vocab.json")]
        if cfg.sweep.enabled:
            needed.append(("sweep", "sweep.json"))
        upstream = self._require(manifest, needed)
        input_hash = self._input_hash("fit", upstream)
        if not force and self._fresh(manifest, "fit", input_hash):
            return StageStatus("fit", ran=False)

        dtm = self._load_dtm()
        vocab = self._load_vocab()
        n_topics = self._selected_topics(manifest)
        hyper = LdaHyper(n_topics=n_topics, seed=cfg.seed, alpha=None,
                         beta=cfg.lda.beta, iterations=cfg.lda.iterations,
                         burn_in=cfg.lda.burn_in, sample_lag=cfg.lda.sample_lag)
        model = fit_lda(dtm, hyper, terms=vocab.terms)

        stage_dir = self.out / "fit"
        stage_dir.mkdir(parents=True, exist_ok=True)
        vocab_hash = sha256_file(self._artifact("prep", "vocab.json"))
        save_model(model, stage_dir / "model.json", vocab_hash)
        write_canonical_json({
            "n_topics": n_topics,
            "samples": [z for z in model.sample_assignments],
            "final": model.assignments,
        }, stage_dir / "samples.json")
        return self._finish(manifest, "fit", input_hash, [
            stage_dir / "model.json", stage_dir / "samples.json"])

    def _load_model(self, with_samples: bool = False) -> TopicModel:
        vocab = self._load_vocab()
        vocab_hash = sha256_file(self._artifact("prep", "vocab.json"))
        model = load_model(self._artifact("fit", "model.json"),
                           expected_vocabulary_hash=vocab_hash, terms=vocab.terms)
        if with_samples:
            from .topicmodel import expand_tokens
            samples = load_json(self._artifact("fit", "samples.json"))
            dtm = self._load_dtm()
            doc_of, word_of = expand_tokens(dtm)
            model.doc_of_token = doc_of
            model.word_of_token = word_of
            model.sample_assignments = [np.asarray(z, dtype=np.int32)
                                        for z in samples["samples"]]
            model.assignments = np.asarray(samples["final"], dtype=np.int32)
        return model

    def _stage_evolve(self, manifest: dict, force: bool) -> StageStatus:
        cfg = self.config
        upstream = self._require(manifest, [
            ("fit", "model.json"), ("fit", "samples.json"),
            ("prep", "dtm.json"), ("ingest", "slices.json")])
        input_hash = self._input_hash("evolve", upstream)
        if not force and self._fresh(manifest, "evolve", input_hash):
            return StageStatus("evolve", ran=False)

        slices = self._load_slices()
        if cfg.dynamics.mode == "slice_conditional":
            model = self._load_model(with_samples=True)
            evolution = slice_topic_distributions(model, slices, cfg.dynamics)
        else:
            dtm = self._load_dtm()
            vocab = self._load_vocab()
            n_topics = self._selected_topics(manifest)
            hyper = LdaHyper(n_topics=n_topics, seed=cfg.seed, alpha=None,
                             beta=cfg.lda.beta, iterations=cfg.lda.iterations,
                             burn_in=cfg.lda.burn_in, sample_lag=cfg.lda.sample_lag)
            evolution = chained_refit(dtm, slices, hyper, cfg.dynamics,
                                      terms=vocab.terms)
        stage_dir = self.out / "evolve"
        stage_dir.mkdir(parents=True, exist_ok=True)
        save_evolution(evolution, stage_dir / "evolution.json")
        return self._finish(manifest, "evolve", input_hash,
                            [stage_dir / "evolution.json"])

    def _load_evolution(self) -> TopicEvolution:
        vocab = self._load_vocab()
        return load_evolution(self._artifact("evolve", "evolution.json"),
                              terms=vocab.terms)

    def _stage_bursts(self, manifest: dict, force: bool) -> StageStatus:
        cfg = self.config
        upstream = self._require(manifest, [
            ("prep", "dtm.json"), ("prep", "vocab.json"), ("ingest", "slices.json")])
        input_hash = self._input_hash("bursts", upstream)
        if not force and self._fresh(manifest, "bursts", input_hash):
            return StageStatus("bursts", ran=False)

        dtm = self._load_dtm()
        vocab = self._load_vocab()
        slices = self._load_slices()
        streams = burst_mod.burst_counts_all(dtm, slices, vocab)
        intervals = []
        notes = []
        for term in vocab.terms:
            stream = streams[term]
            if int(stream.r.sum()) < 1:
                continue
            if stream.r.sum() == stream.d.sum():
                notes.append({"term": term,
                              "note": "appears in every document; no burst "
                                      "state is distinguishable"})
                continue
            intervals.extend(burst_mod.detect_bursts(stream, cfg.burst))
        ranked = burst_mod.rank_bursts(intervals)

        stage_dir = self.out / "bursts"
        stage_dir.mkdir(parents=True, exist_ok=True)
        write_canonical_json({
            "bursts": [{"term": b.term, "start_year": b.start_year,
                        "end_year": b.end_year, "weight": b.weight,
                        "ongoing": b.ongoing} for b in ranked],
            "notes": notes,
        }, stage_dir / "bursts.json")
        _write_csv(stage_dir / "bursts.csv",
                   ["term", "start_year", "end_year", "weight", "ongoing"],
                   [[b.term, b.start_year, b.end_year, _fmt_float(b.weight),
                     str(b.ongoing).lower()] for b in ranked])
        return self._finish(manifest, "bursts", input_hash, [
            stage_dir / "bursts.json", stage_dir / "bursts.csv"])

    def _trend_universe(self, evolution: TopicEvolution, k: int) -> list[str]:
        from .ideation import pooled_label_terms
        return [t for t, _ in pooled_label_terms(
            evolution, k, n=self.config.candidates.trend_top)]

    def _stage_trends(self, manifest: dict, force: bool) -> StageStatus:
        cfg = self.config
        upstream = self._require(manifest, [
            ("evolve", "evolution.json"), ("fit", "model.json"),
            ("prep", "vocab.json")])
        input_hash = self._input_hash("trends", upstream)
        if not force and self._fresh(manifest, "trends", input_hash):
            return StageStatus("trends", ran=False)

        evolution = self._load_evolution()
        model = self._load_model()
        horizon = cfg.trends.forecast_horizon
        future_years = [evolution.years[-1] + i for i in range(1, horizon + 1)]

        fits_out = []
        traj_rows = []
        for k in range(evolution.n_topics):
            for term in self._trend_universe(evolution, k):
                series = term_trajectory(evolution, k, term)
                fit = ols_fit(series)
                points = forecast(fit, future_years, probability=True)
                fits_out.append({
                    "topic": k, "term": term,
                    "slope": fit.slope, "intercept": fit.intercept,
                    "r_squared": fit.r_squared,
                    "t_stat": None if not np.isfinite(fit.t_stat) else fit.t_stat,
                    "p_value": fit.p_value, "n": fit.n, "dof": fit.dof,
                    "sigma2": fit.sigma2,
                    "forecast": [{"year": p.year, "value": p.value,
                                  "clamped": p.clamped} for p in points],
                })
                for year, value in zip(series.years, series.values):
                    fitted = fit.intercept + fit.slope * year
                    traj_rows.append([k, term, year, _fmt_float(value),
                                      _fmt_float(fitted)])

        correlations = []
        for k in range(evolution.n_topics):
            labels = [t for t, _ in top_terms(model, k, 10)]
            series = {t: term_trajectory(evolution, k, t) for t in labels}
            for i in range(len(labels)):
                for j in range(i + 1, len(labels)):
                    a, b = labels[i], labels[j]
                    try:
                        res = pearson(series[a], series[b])
                    except DataError:
                        continue  # zero-variance trajectory: no correlation
                    correlations.append({"topic": k, "term_a": a, "term_b": b,
                                         "r": res.r, "t_stat": None if not np.isfinite(res.t_stat) else res.t_stat,
                                         "p_value": res.p_value, "n": res.n})

        stage_dir = self.out / "trends"
        stage_dir.mkdir(parents=True, exist_ok=True)
        write_canonical_json({"fits": fits_out, "correlations": correlations},
                             stage_dir / "trends.json")
        _write_csv(stage_dir / "trajectories.csv",
                   ["topic", "term", "year", "value", "fitted"], traj_rows)
        return self._finish(manifest, "trends", input_hash, [
            stage_dir / "trends.json", stage_dir / "trajectories.csv"])

    def _stage_ideas(self, manifest: dict, force: bool) -> StageStatus:
        cfg = self.config
        upstream = self._require(manifest, [
            ("trends", "trends.json"), ("bursts", "bursts.json"),
            ("evolve", "evolution.json"), ("fit", "model.json")])
        extra_files = {}
        if cfg.efficacy.tree_path:
            extra_files["efficacy_tree"] = sha256_file(cfg.efficacy.tree_path)
        if cfg.efficacy.ratings_path:
            extra_files["ratings"] = sha256_file(cfg.efficacy.ratings_path)
        input_hash = self._input_hash("ideas", upstream, extra_files or None)
        if not force and self._fresh(manifest, "ideas", input_hash):
            return StageStatus("ideas", ran=False)

        evolution = self._load_evolution()
        model = self._load_model()
        trends_doc = load_json(self._artifact("trends", "trends.json"))
        bursts_doc = load_json(self._artifact("bursts", "bursts.json"))

        trend_fits: dict[int, dict[str, TrendFit]] = {}
        for f in trends_doc["fits"]:
            t_stat = f["t_stat"] if f["t_stat"] is not None else float("inf")
            trend_fits.setdefault(f["topic"], {})[f["term"]] = TrendFit(
                slope=f["slope"], intercept=f["intercept"],
                r_squared=f["r_squared"], t_stat=t_stat, p_value=f["p_value"],
                n=f["n"], dof=f["dof"], sigma2=f["sigma2"],
                label=f"topic{f['topic']}:{f['term']}")
        intervals = [burst_mod.BurstInterval(
            term=b["term"], start_year=b["start_year"], end_year=b["end_year"],
            weight=b["weight"], ongoing=b["ongoing"])
            for b in bursts_doc["bursts"]]
        from .trendlab import CorrelationResult
        correlations: dict[int, list] = {}
        for c in trends_doc["correlations"]:
            t_stat = c["t_stat"] if c["t_stat"] is not None else float("inf")
            correlations.setdefault(c["topic"], []).append(
                (c["term_a"], c["term_b"],
                 CorrelationResult(r=c["r"], t_stat=t_stat,
                                   p_value=c["p_value"], n=c["n"])))
        label_terms = {k: top_terms(model, k, 10) for k in range(model.n_topics)}

        candidates = assemble_idea_candidates(
            evolution, trend_fits, intervals, correlations, cfg.candidates,
            label_terms=label_terms, statements=cfg.statements)

        efficacy_model = (load_efficacy_model(cfg.efficacy.tree_path)
                          if cfg.efficacy.tree_path else default_efficacy_model())
        ratings = (load_ratings(cfg.efficacy.ratings_path)
                   if cfg.efficacy.ratings_path else {})
        scored = []
        unscored = []
        for cand in candidates:
            idea_id = f"topic-{cand.topic}"
            if idea_id in ratings:
                index = saw_score(efficacy_model, ratings[idea_id])
                scored.append(ScoredIdea(topic=cand.topic, idea_id=idea_id,
                                         index=index, candidate=cand))
            else:
                unscored.append(idea_id)
        ranking = rank_ideas(scored, cfg.efficacy.viability_threshold)

        stage_dir = self.out / "ideas"
        stage_dir.mkdir(parents=True, exist_ok=True)
        write_canonical_json({
            "candidates": [c.to_dict() for c in candidates],
            "efficacy": {
                "ranking": [{"idea_id": s.idea_id, "topic": s.topic,
                             "index": s.index} for s in ranking.ranked],
                "viable_count": ranking.viable_count,
                "viable_percentage": ranking.viable_percentage,
                "viability_threshold": ranking.viability_threshold,
                "unscored": sorted(unscored),
            },
        }, stage_dir / "ideas.json")
        return self._finish(manifest, "ideas", input_hash,
                            [stage_dir / "ideas.json"])

    def _stage_report(self, manifest: dict, force: bool) -> StageStatus:
        cfg = self.config
        needed = [("ingest", "ingest_report.json"), ("ingest", "dedupe_report.json"),
                  ("ingest", "slices.json"), ("prep", "vocab.json"),
                  ("prep", "dtm.json"), ("prep", "term_report.json"),
                  ("fit", "model.json"), ("evolve", "evolution.json"),
                  ("bursts", "bursts.json"), ("trends", "trends.json"),
                  ("trends", "trajectories.csv"), ("ideas", "ideas.json")]
        if cfg.sweep.enabled:
            needed.append(("sweep", "sweep.json"))
        upstream = self._require(manifest, needed)
        input_hash = self._input_hash("report", upstream)
        if not force and self._fresh(manifest, "report", input_hash):
            return StageStatus("report", ran=False)

        ingest_report = load_json(self._artifact("ingest", "ingest_report.json"))
        dedupe_report = load_json(self._artifact("ingest", "dedupe_report.json"))
        slices_doc = load_json(self._artifact("ingest", "slices.json"))
        dtm_doc = load_json(self._artifact("prep", "dtm.json"))
        term_report = load_json(self._artifact("prep", "term_report.json"))
        model = self._load_model()
        evolution = self._load_evolution()
        trends_doc = load_json(self._artifact("trends", "trends.json"))
        bursts_doc = load_json(self._artifact("bursts", "bursts.json"))
        ideas_doc = load_json(self._artifact("ideas", "ideas.json"))
        sweep_doc = (load_json(self._artifact("sweep", "sweep.json"))
                     if cfg.sweep.enabled else None)

        topics = []
        trajectories = []
        for k in range(model.n_topics):
            labels = top_terms(model, k, 10)
            topics.append({"topic": k, "label_terms": [[t, p] for t, p in labels]})
            for term, _ in labels[:5]:
                series = term_trajectory(evolution, k, term)
                trajectories.append({
                    "topic": k, "term": term, "years": series.years,
                    "values": series.values,
                    "flagged_years": series.flagged_years,
                })

        diag = model.diagnostics
        report = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "tool_version": TOOL_VERSION,
            "goal": cfg.goal,
            "source_descriptor": cfg.source_descriptor,
            "config": cfg.echo_dict(),
            "corpus": {
                "documents": len(dtm_doc["docs"]),
                "accepted": ingest_report["accepted"],
                "rejected": len(ingest_report["rejected"]),
                "dedupe_merges": len(dedupe_report["merges"]),
                "empty_after_prep": dtm_doc["empty_docs"],
                "year_min": slices_doc["year_min"],
                "year_max": slices_doc["year_max"],
                "excluded_by_year": slices_doc["excluded"],
                "slice_sizes": [len(s) for s in slices_doc["slices"]],
            },
            "top_terms": term_report["top_terms"][:25],
            "model_selection": {
                "enabled": cfg.sweep.enabled,
                "selected_n_topics": model.n_topics,
                "select_by": cfg.sweep.select_by if cfg.sweep.enabled else None,
                "curve": sweep_doc["entries"] if sweep_doc else [],
            },
            "model": {
                "n_topics": model.n_topics,
                "perplexity": diag.perplexity if diag else None,
                "mean_coherence": diag.mean_coherence if diag else None,
                "coherence_per_topic": diag.umass_coherence_per_topic if diag else [],
            },
            "topics": topics,
            "trajectories": trajectories,
            "trends": trends_doc["fits"],
            "correlations": trends_doc["correlations"],
            "bursts": bursts_doc["bursts"],
            "burst_notes": bursts_doc["notes"],
            "idea_candidates": ideas_doc["candidates"],
            "efficacy": ideas_doc["efficacy"],
        }

        stage_dir = self.out / "report"
        charts_dir = stage_dir / "charts"
        csv_dir = stage_dir / "csv"
        charts_dir.mkdir(parents=True, exist_ok=True)
        csv_dir.mkdir(parents=True, exist_ok=True)
        write_canonical_json(report, stage_dir / "report.json")

        files = [stage_dir / "report.json"]

        # CSV bundle: every emitted time series
        traj_csv = csv_dir / "trajectories.csv"
        with open(self._artifact("trends", "trajectories.csv"), "rb") as src, \
                open(traj_csv, "wb") as dst:
            dst.write(src.read())
        files.append(traj_csv)
        bursts_csv = csv_dir / "bursts.csv"
        _write_csv(bursts_csv, ["term", "start_year", "end_year", "weight", "ongoing"],
                   [[b["term"], b["start_year"], b["end_year"],
                     _fmt_float(b["weight"]), str(b["ongoing"]).lower()]
                    for b in bursts_doc["bursts"]])
        files.append(bursts_csv)
        if sweep_doc:
            sweep_csv = csv_dir / "sweep.csv"
            _write_csv(sweep_csv, ["n_topics", "perplexity", "mean_coherence"],
                       [[e["n_topics"], _fmt_float(e["perplexity"]),
                         _fmt_float(e["mean_coherence"])] for e in sweep_doc["entries"]])
            files.append(sweep_csv)

        # charts
        for k in range(model.n_topics):
            series = [TimeSeries(years=t["years"], values=t["values"],
                                 label=t["term"])
                      for t in trajectories if t["topic"] == k]
            if not series:
                continue
            path = charts_dir / f"trajectory_topic{k}.svg"
            svgchart.render_svg_chart("trajectory", path, series=series,
                                      title=f"Topic {k} term trajectories")
            files.append(path)
        if sweep_doc:
            curve = sweep_doc["entries"]
            metric = ("mean_coherence" if cfg.sweep.select_by == "coherence"
                      else "perplexity")
            sweep_series = TimeSeries(
                years=[e["n_topics"] for e in curve],
                values=[e[metric] for e in curve], label=metric)
            path = charts_dir / "sweep_curve.svg"
            svgchart.render_svg_chart("sweep_curve", path,
                                      sweep_series=sweep_series,
                                      selected=sweep_doc["selected"])
            files.append(path)
        if bursts_doc["bursts"]:
            intervals = [burst_mod.BurstInterval(
                term=b["term"], start_year=b["start_year"],
                end_year=b["end_year"], weight=b["weight"], ongoing=b["ongoing"])
                for b in bursts_doc["bursts"][:20]]
            path = charts_dir / "burst_timeline.svg"
            svgchart.render_svg_chart("burst_timeline", path, intervals=intervals,
                                      year_min=slices_doc["year_min"],
                                      year_max=slices_doc["year_max"])
            files.append(path)

        return self._finish(manifest, "report", input_hash, files)


def _fmt_float(x: float) -> str:
    return f"{float(x):.12g}"


def _write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
