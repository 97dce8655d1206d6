"""Experiment harness: variant configs, runners, and suite orchestration.

A variant toggles four components: role prompts, co-learning, the gain
regressor (GP or neural), and the Pareto front mode. The shipped default
suite runs seven variants over a synthetic six-domain corpus with the
planted-pattern mock backend; everything is a pure function of
(configs, corpus, seed), so reports are byte-identical across reruns.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .backends import (
    CachingBackend,
    CompletionBackend,
    DecodeParams,
    HttpBackend,
    LiveConfig,
    MockBackend,
    mock_correct_label,
)
from .corpus import Exercise, ExerciseBlock, group_by_domain, make_synthetic_corpus
from .features import HashingEmbedder, build_dataset, dataset_arrays
from .gp import GpFitConfig, GpRegressor
from .hashing import stable_u64
from .metrics import (
    MetricsTable,
    Stats,
    build_table,
    compute_metrics,
    gain_report,
    write_category_table_csv,
    write_category_table_text,
    write_component_table_csv,
    write_component_table_text,
)
from .nn import MlpConfig, MlpRegressor
from .pareto import (
    ParetoFront,
    dump_front,
    local_candidates,
    pareto_front,
    rank_candidates,
    save_front_dumps,
    score_vector,
)
from .personas import Learner, PromptSet, default_cohort, default_prompts
from .protocol import (
    CallEvent,
    PairedResponseRecord,
    ResponseRecord,
    exchange_and_resolve,
    solve_exercise,
)

log = logging.getLogger(__name__)

REGRESSOR_KINDS = ("none", "gp", "nn")
PARETO_MODES = ("none", "global", "local")
BACKEND_KINDS = ("mock", "cache", "live")
REQUIRED_TEST_CATEGORIES = ("STEM", "Social Science", "Humanities")

# Lighter than the library-wide fit defaults so a full 7-variant suite stays
# within its runtime budget; recovery-grade fits use GpFitConfig() directly.
SUITE_GP_FIT = GpFitConfig(restarts=1, max_iters=100, tol=1e-6)


class ConfigError(ValueError):
    """Inconsistent or unknown variant configuration."""


@dataclass(frozen=True)
class VariantConfig:
    """One experiment setting, mirroring the component-removal matrix.

    A regressor requires co-learning, and a Pareto mode requires a
    regressor (and vice versa: selection without a front is undefined).
    ``train_domains`` are held out for regressor training; every other
    domain is evaluated.
    """

    name: str
    role_setting: bool
    co_learning: bool
    regressor: str = "none"
    pareto: str = "none"
    seed: int = 0
    backend: str = "mock"
    train_domains: tuple[str, ...] = ()
    mock_base_difficulty: float = 0.4
    mock_bonus: float = 0.3
    selection_rule: str = "mean"
    gain_baseline: str = "self"
    gp_fit: GpFitConfig = field(default_factory=lambda: SUITE_GP_FIT)
    nn_fit: MlpConfig = field(default_factory=MlpConfig)

    def validate(self) -> None:
        if self.regressor not in REGRESSOR_KINDS:
            raise ConfigError(f"{self.name}: unknown regressor {self.regressor!r}")
        if self.pareto not in PARETO_MODES:
            raise ConfigError(f"{self.name}: unknown pareto mode {self.pareto!r}")
        if self.backend not in BACKEND_KINDS:
            raise ConfigError(f"{self.name}: unknown backend {self.backend!r}")
        if self.regressor != "none" and not self.co_learning:
            raise ConfigError(f"{self.name}: a regressor requires co_learning")
        if self.pareto != "none" and self.regressor == "none":
            raise ConfigError(f"{self.name}: a pareto mode requires a regressor")
        if self.regressor != "none" and self.pareto == "none":
            raise ConfigError(f"{self.name}: a regressor requires a pareto mode")
        if self.regressor != "none" and not self.train_domains:
            raise ConfigError(f"{self.name}: a regressor requires train_domains")
        if self.selection_rule not in ("mean", "poi"):
            raise ConfigError(f"{self.name}: unknown selection rule {self.selection_rule!r}")

    def component_flags(self) -> tuple[str, bool, bool, bool, bool]:
        return (
            self.name,
            self.role_setting,
            self.co_learning,
            self.regressor == "gp",
            self.pareto != "none",
        )

    def echo(self) -> dict:
        return {
            "name": self.name,
            "role_setting": self.role_setting,
            "co_learning": self.co_learning,
            "regressor": self.regressor,
            "pareto": self.pareto,
            "seed": self.seed,
            "backend": self.backend,
            "train_domains": list(self.train_domains),
            "mock_base_difficulty": self.mock_base_difficulty,
            "mock_bonus": self.mock_bonus,
            "selection_rule": self.selection_rule,
            "gain_baseline": self.gain_baseline,
        }


@dataclass(frozen=True)
class SelectionEvent:
    """One partner choice for one test exercise."""

    learner_id: str
    partner_id: str
    domain: str
    exercise_id: str
    anchor_subject: int
    partner_subject: int

    @property
    def complementary(self) -> bool:
        return self.anchor_subject * self.partner_subject == -1


@dataclass(frozen=True, eq=False)
class RunResult:
    """Everything one variant run produced."""

    config: VariantConfig
    per_learner: dict[str, dict[str, float]]
    train_solo: tuple[ResponseRecord, ...]
    train_paired: tuple[PairedResponseRecord, ...]
    test_solo: tuple[ResponseRecord, ...]
    test_paired: tuple[PairedResponseRecord, ...]
    selections: tuple[SelectionEvent, ...]
    lp_fallbacks: int
    artifacts: dict[str, str]

    def stats(self) -> dict[str, Stats]:
        return compute_metrics(self.per_learner)


def _decode_seed(learner_id: str, exercise_id: str) -> int:
    """Variant-independent sampling seed: shared across comparable calls."""
    return stable_u64("decode", learner_id, exercise_id) % 2**32


def build_backend(cfg: VariantConfig, cache_dir: str | Path | None = None,
                  live: LiveConfig | None = None) -> CompletionBackend:
    mock = MockBackend(cfg.seed, cfg.mock_base_difficulty, cfg.mock_bonus)
    if cfg.backend == "mock":
        return mock
    if cfg.backend == "cache":
        if cache_dir is None:
            raise ConfigError("cache backend needs a cache directory")
        inner: CompletionBackend = HttpBackend(live) if live is not None else mock
        return CachingBackend(inner, cache_dir)
    if live is None:
        raise ConfigError("live backend needs a live configuration")
    return HttpBackend(live)


class _TranscriptLog:
    """Collects call events as JSON lines in execution order."""

    def __init__(self, run_id: str):
        self.run_id = run_id
        self.lines: list[str] = []

    def sink(self, partner_id: str | None, exercise_id: str) -> Callable[[int, CallEvent], None]:
        def write(step: int, event: CallEvent) -> None:
            self.lines.append(
                json.dumps(
                    {
                        "run_id": self.run_id,
                        "step": step,
                        "learner_id": event.actor_id,
                        "partner_id": partner_id,
                        "exercise_id": exercise_id,
                        "prompt_hash": event.prompt_hash,
                        "reply": event.reply,
                    },
                    ensure_ascii=False,
                )
            )

        return write

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.lines) + ("\n" if self.lines else ""), "utf-8")


def _split_blocks(cfg: VariantConfig, corpus: Sequence[Exercise]) -> tuple[list[ExerciseBlock], list[ExerciseBlock]]:
    blocks = group_by_domain(corpus)
    known = {b.domain for b in blocks}
    for domain in cfg.train_domains:
        if domain not in known:
            raise ConfigError(f"{cfg.name}: train domain {domain!r} not in corpus")
    train = [b for b in blocks if b.domain in cfg.train_domains]
    test = [b for b in blocks if b.domain not in cfg.train_domains]
    if not test:
        raise ConfigError(f"{cfg.name}: no test blocks remain")
    test_categories = {b.exercises[0].category for b in test}
    missing = [c for c in REQUIRED_TEST_CATEGORIES if c not in test_categories]
    if missing:
        raise ConfigError(f"{cfg.name}: test blocks miss categories {missing}")
    return train, test


def _accuracies(
    learners: Sequence[Learner],
    test_blocks: Sequence[ExerciseBlock],
    records: Iterable,
) -> dict[str, dict[str, float]]:
    category_of = {e.id: e.category for b in test_blocks for e in b.exercises}
    per_learner: dict[str, dict[str, float]] = {}
    by_learner: dict[str, list] = {l.id: [] for l in learners}
    for rec in records:
        by_learner[rec.learner_id].append(rec)
    categories = [c for c in REQUIRED_TEST_CATEGORIES]
    for learner in learners:
        recs = by_learner[learner.id]
        scores: dict[str, float] = {}
        for category in categories:
            cat_recs = [r for r in recs if category_of[r.exercise_id] == category]
            scores[category] = sum(r.r for r in cat_recs) / len(cat_recs)
        scores["Total"] = sum(r.r for r in recs) / len(recs)
        per_learner[learner.id] = scores
    return per_learner


def resolve_front(
    learner_id: str,
    history: Sequence[PairedResponseRecord],
    global_vectors,
    mode: str,
) -> tuple[ParetoFront, bool]:
    """Front for one learner; an empty local history falls back to the global front."""
    if mode == "local":
        candidates = local_candidates(learner_id, history)
        if candidates:
            return pareto_front(candidates, anchor=learner_id, mode="local"), False
        log.warning("learner %s has no interaction history; falling back to the global front", learner_id)
        return pareto_front(global_vectors, anchor=learner_id, mode="global"), True
    return pareto_front(global_vectors, anchor=learner_id, mode="global"), False


def run_variant(
    cfg: VariantConfig,
    corpus: Sequence[Exercise],
    cohort: Mapping[str, Learner] | None = None,
    *,
    backend: CompletionBackend | None = None,
    prompts: PromptSet | None = None,
    emb=None,
    out_dir: str | Path | None = None,
    cache_dir: str | Path | None = None,
    live: LiveConfig | None = None,
) -> RunResult:
    """Run one variant end to end and compute per-learner accuracies."""
    cfg.validate()
    cohort = cohort or default_cohort()
    train_blocks, test_blocks = _split_blocks(cfg, corpus)
    backend = backend or build_backend(cfg, cache_dir=cache_dir, live=live)
    prompts = prompts or default_prompts()
    emb = emb or HashingEmbedder()
    learners = [cohort[key] for key in sorted(cohort)]
    if len(learners) < 2 and cfg.co_learning:
        raise ConfigError(f"{cfg.name}: co-learning needs at least two learners")

    transcript = _TranscriptLog(run_id=f"{cfg.name}@{cfg.seed}")
    train_solo: list[ResponseRecord] = []
    train_paired: list[PairedResponseRecord] = []
    test_solo: list[ResponseRecord] = []
    test_paired: list[PairedResponseRecord] = []
    selections: list[SelectionEvent] = []
    front_dumps: list[dict] = []
    lp_fallbacks = 0
    artifacts: dict[str, str] = {}

    def params_for(learner: Learner, exercise: Exercise) -> DecodeParams:
        return DecodeParams(seed=_decode_seed(learner.id, exercise.id))

    if not cfg.co_learning:
        for learner in learners:
            for block in test_blocks:
                for exercise in block.exercises:
                    test_solo.append(
                        solve_exercise(
                            learner,
                            exercise,
                            backend,
                            params=params_for(learner, exercise),
                            prompts=prompts,
                            use_persona=cfg.role_setting,
                            sink=transcript.sink(None, exercise.id),
                        )
                    )
        scored_records: Iterable = test_solo
    elif cfg.regressor == "none":
        # keyed on the seed alone so a full config degraded to random pairing
        # reproduces the canonical random-pairing variant exactly
        rng = random.Random(stable_u64("pairing", str(cfg.seed)))
        for learner in learners:
            others = [l for l in learners if l.id != learner.id]
            for block in test_blocks:
                for exercise in block.exercises:
                    partner = others[rng.randrange(len(others))]
                    test_paired.append(
                        exchange_and_resolve(
                            learner,
                            partner,
                            exercise,
                            backend,
                            params=params_for(learner, exercise),
                            prompts=prompts,
                            sink=transcript.sink(partner.id, exercise.id),
                        )
                    )
        scored_records = test_paired
    else:
        all_blocks = train_blocks + test_blocks
        for learner in learners:
            for block in all_blocks:
                for exercise in block.exercises:
                    train_solo.append(
                        solve_exercise(
                            learner,
                            exercise,
                            backend,
                            params=params_for(learner, exercise),
                            prompts=prompts,
                            sink=transcript.sink(None, exercise.id),
                        )
                    )
        for learner in learners:
            for partner in learners:
                if partner.id == learner.id:
                    continue
                for block in train_blocks:
                    for exercise in block.exercises:
                        train_paired.append(
                            exchange_and_resolve(
                                learner,
                                partner,
                                exercise,
                                backend,
                                params=params_for(learner, exercise),
                                prompts=prompts,
                                sink=transcript.sink(partner.id, exercise.id),
                            )
                        )

        samples = build_dataset(cohort, train_blocks, train_paired, train_solo, emb, cfg.gain_baseline)
        X, y = dataset_arrays(samples)
        if cfg.regressor == "gp":
            fitted = GpRegressor(replace(cfg.gp_fit, seed=cfg.seed)).fit(X, y)
        else:
            fitted = MlpRegressor(replace(cfg.nn_fit, seed=cfg.seed)).fit(X, y)
        if out_dir is not None:
            model_path = Path(out_dir) / "models" / f"{cfg.name}.json"
            fitted.save(model_path)
            artifacts["model"] = str(Path("models") / f"{cfg.name}.json")

        global_vectors = [score_vector(l.id, train_solo, all_blocks) for l in learners]
        subject_of = {l.id: l.persona.subject_pref for l in learners}
        fronts: dict[str, ParetoFront] = {}
        for learner in learners:
            front, fell_back = resolve_front(learner.id, train_paired, global_vectors, cfg.pareto)
            fronts[learner.id] = front
            lp_fallbacks += int(fell_back)

        for learner in learners:
            for block in test_blocks:
                front = fronts[learner.id]
                scored = rank_candidates(learner, front, fitted, block, emb, cohort, cfg.selection_rule)
                partner_id = scored[0].learner_id
                dump = dump_front(front, scored)
                dump.update({"domain": block.domain, "chosen": partner_id})
                front_dumps.append(dump)
                partner = cohort[partner_id]
                for exercise in block.exercises:
                    selections.append(
                        SelectionEvent(
                            learner_id=learner.id,
                            partner_id=partner_id,
                            domain=block.domain,
                            exercise_id=exercise.id,
                            anchor_subject=subject_of[learner.id],
                            partner_subject=subject_of[partner_id],
                        )
                    )
                    test_paired.append(
                        exchange_and_resolve(
                            learner,
                            partner,
                            exercise,
                            backend,
                            params=params_for(learner, exercise),
                            prompts=prompts,
                            sink=transcript.sink(partner_id, exercise.id),
                        )
                    )
        scored_records = test_paired

    per_learner = _accuracies(learners, test_blocks, scored_records)

    if out_dir is not None:
        out_dir = Path(out_dir)
        transcript_rel = Path("transcripts") / f"{cfg.name}.jsonl"
        transcript.save(out_dir / transcript_rel)
        artifacts["transcript"] = str(transcript_rel)
        if front_dumps:
            fronts_rel = Path("fronts") / f"{cfg.name}.json"
            save_front_dumps(front_dumps, out_dir / fronts_rel)
            artifacts["fronts"] = str(fronts_rel)

    return RunResult(
        config=cfg,
        per_learner=per_learner,
        train_solo=tuple(train_solo),
        train_paired=tuple(train_paired),
        test_solo=tuple(test_solo),
        test_paired=tuple(test_paired),
        selections=tuple(selections),
        lp_fallbacks=lp_fallbacks,
        artifacts=artifacts,
    )


DEFAULT_SYNTH_SPEC = (
    ("number_theory", "STEM", 10),
    ("circuit_design", "STEM", 10),
    ("market_research", "Social Science", 10),
    ("urban_geography", "Social Science", 10),
    ("modern_poetry", "Humanities", 10),
    ("formal_logic", "Humanities", 10),
)
DEFAULT_TRAIN_DOMAINS = ("number_theory", "market_research", "modern_poetry")


def default_synthetic_corpus(seed: int = 0, per_domain: int = 10) -> list[Exercise]:
    """Six synthetic domains, two per major category, with mock-consistent keys."""
    spec = tuple((d, c, per_domain) for d, c, _ in DEFAULT_SYNTH_SPEC)
    return make_synthetic_corpus(spec, seed=seed, key_fn=mock_correct_label)


def default_suite_configs(
    seed: int = 0,
    train_domains: Sequence[str] = DEFAULT_TRAIN_DOMAINS,
    backend: str = "mock",
    mock_base_difficulty: float = 0.4,
    mock_bonus: float = 0.3,
) -> list[VariantConfig]:
    """The seven shipped variants, ordered from no modeling to full matching."""
    shared = dict(
        seed=seed,
        backend=backend,
        train_domains=tuple(train_domains),
        mock_base_difficulty=mock_base_difficulty,
        mock_bonus=mock_bonus,
    )
    return [
        VariantConfig(name="baseline", role_setting=False, co_learning=False, **shared),
        VariantConfig(name="solo", role_setting=True, co_learning=False, **shared),
        VariantConfig(name="random-pair", role_setting=True, co_learning=True, **shared),
        VariantConfig(name="gp-global", role_setting=True, co_learning=True, regressor="gp", pareto="global", **shared),
        VariantConfig(name="gp-local", role_setting=True, co_learning=True, regressor="gp", pareto="local", **shared),
        VariantConfig(name="nn-global", role_setting=True, co_learning=True, regressor="nn", pareto="global", **shared),
        VariantConfig(name="nn-local", role_setting=True, co_learning=True, regressor="nn", pareto="local", **shared),
    ]


def _is_baseline(cfg: VariantConfig) -> bool:
    return not cfg.role_setting and not cfg.co_learning and cfg.regressor == "none"


@dataclass(frozen=True, eq=False)
class SuiteResult:
    table: MetricsTable
    gain_text: str
    results: tuple[RunResult, ...]
    baseline: str
    out_dir: str | None


def run_suite(
    configs: Sequence[VariantConfig],
    corpus: Sequence[Exercise],
    cohort: Mapping[str, Learner] | None = None,
    out_dir: str | Path | None = None,
    *,
    live: LiveConfig | None = None,
) -> SuiteResult:
    """Run every variant sequentially and render both report shapes."""
    baselines = [cfg.name for cfg in configs if _is_baseline(cfg)]
    if not baselines:
        raise ConfigError("suite needs a baseline variant (no roles, no co-learning)")
    baseline = baselines[0]
    cohort = cohort or default_cohort()
    cache_dir = Path(out_dir) / "cache" if out_dir is not None else None

    results: list[RunResult] = []
    for cfg in configs:
        try:
            results.append(
                run_variant(cfg, corpus, cohort, out_dir=out_dir, cache_dir=cache_dir, live=live)
            )
        except Exception as exc:
            raise type(exc)(f"variant {cfg.name!r}: {exc}") from exc

    table = build_table([(res.config.name, res.stats()) for res in results])
    gain_text = gain_report(table, baseline)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_category_table_csv(table, out_dir / "category_table.csv")
        write_category_table_text(table, out_dir / "category_table.txt")
        rows = [res.config.component_flags() for res in results]
        write_component_table_csv(rows, table, baseline, out_dir / "component_table.csv")
        write_component_table_text(rows, table, baseline, out_dir / "component_table.txt")
        payload = {
            "baseline": baseline,
            "variants": [
                {
                    "config": res.config.echo(),
                    "per_learner": res.per_learner,
                    "lp_fallbacks": res.lp_fallbacks,
                    "selections": [
                        {
                            "learner_id": s.learner_id,
                            "partner_id": s.partner_id,
                            "domain": s.domain,
                            "exercise_id": s.exercise_id,
                            "complementary": s.complementary,
                        }
                        for s in res.selections
                    ],
                    "artifacts": res.artifacts,
                }
                for res in results
            ],
        }
        (out_dir / "results.json").write_text(json.dumps(payload, indent=1, sort_keys=True), "utf-8")

    return SuiteResult(
        table=table,
        gain_text=gain_text,
        results=tuple(results),
        baseline=baseline,
        out_dir=str(out_dir) if out_dir is not None else None,
    )


def rerender_reports(out_dir: str | Path) -> None:
    """Rebuild the report files from a stored results.json."""
    out_dir = Path(out_dir)
    payload = json.loads((out_dir / "results.json").read_text("utf-8"))
    rows = []
    flag_rows = []
    for entry in payload["variants"]:
        cfg = entry["config"]
        rows.append((cfg["name"], compute_metrics(entry["per_learner"])))
        flag_rows.append(
            (
                cfg["name"],
                cfg["role_setting"],
                cfg["co_learning"],
                cfg["regressor"] == "gp",
                cfg["pareto"] != "none",
            )
        )
    table = build_table(rows)
    write_category_table_csv(table, out_dir / "category_table.csv")
    write_category_table_text(table, out_dir / "category_table.txt")
    write_component_table_csv(flag_rows, table, payload["baseline"], out_dir / "component_table.csv")
    write_component_table_text(flag_rows, table, payload["baseline"], out_dir / "component_table.txt")
