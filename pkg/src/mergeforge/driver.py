"""Iteration engine: generate, filter, score, build preferences, refine, track.

One run executes I iterations.  Each iteration samples N candidate programs
at the scheduled temperature, filters them into the five outcome categories,
scores the survivors on dev probes, and refines the generator policy from
preference pairs (chosen = top scorers plus the best k programs carried over
from every earlier iteration).  Test probes are touched exactly once, at the
end, on the top-n dev performers across all iterations; no test information
ever feeds back into generation.

All randomness is derived from the run seed through tagged sub-streams keyed
by (iteration, candidate index), so grammar-mode runs are bit-reproducible.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .benchmark import BenchmarkInstance, make_instance, save_instance, score as probe_score
from .config import RunConfig, config_echo
from .core import apply_merged, grid_search_task_arithmetic, task_arithmetic
from .dsl import EvalBudget, default_budget
from .generator import (
    GeneratorPolicy,
    default_grammar,
    default_prompt_template,
    remote_generate,
    sample_program,
    temperature,
)
from .pipeline import (
    SUCCESS,
    CandidateOutcome,
    ScoredAlgorithm,
    build_preferences,
    category_counts,
    exact_text_duplicates,
    filter_candidates,
    refine_policy,
    score_program,
    select_preference_sets,
    write_preference_jsonl,
)
from .report import write_reports

log = logging.getLogger(__name__)

# Domain tags for rng sub-streams; candidate sampling is keyed per index so
# results do not depend on scheduling.
_GEN_STREAM = 101
_PREF_STREAM = 202

TASK_ARITHMETIC_GRID = (0.2, 0.4, 0.6)


@dataclass
class IterationStats:
    iteration: int
    temperature: float
    counts: dict[str, int]
    success_scores: list[float]
    chosen: list[ScoredAlgorithm]
    pairs_built: int
    policy_version: int
    duplicate_exact_text: int


@dataclass
class RunState:
    best: ScoredAlgorithm | None = None
    history: list[IterationStats] = field(default_factory=list)
    all_scored: list[ScoredAlgorithm] = field(default_factory=list)

    @property
    def s_best(self) -> float | None:
        return None if self.best is None else self.best.dev_score

    def carryover_pool(self) -> list[ScoredAlgorithm]:
        return [alg for stats in self.history for alg in stats.chosen]


@dataclass(frozen=True)
class RunReport:
    s_best: float | None
    best: ScoredAlgorithm | None
    iterations: list[IterationStats]
    top_test: list[tuple[ScoredAlgorithm, float]]
    baselines: dict


def _ranked(algorithms) -> list[ScoredAlgorithm]:
    return sorted(algorithms, key=lambda a: (-a.dev_score, a.iteration, a.program.source))


def select_best(state: RunState, n: int) -> list[ScoredAlgorithm]:
    """Top-n distinct dev performers across all iterations.

    Distinct by canonical hash; ranked score-descending with ties broken by
    earlier iteration, then lexicographic source.
    """
    out: list[ScoredAlgorithm] = []
    seen: set[str] = set()
    for alg in _ranked(state.all_scored):
        if alg.program.canonical_hash in seen:
            continue
        seen.add(alg.program.canonical_hash)
        out.append(alg)
        if len(out) == n:
            break
    if not out:
        log.warning("no successful programs in this run")
    return out


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _candidate_record(iteration: int, index: int, outcome: CandidateOutcome) -> dict:
    return {
        "iteration": iteration,
        "index": index,
        "category": outcome.category,
        "hash": outcome.program.canonical_hash if outcome.program else None,
        "score": outcome.dev_score,
        "reason": outcome.reason,
        "source": outcome.source,
    }


def _iteration_record(stats: IterationStats, s_best: float | None) -> dict:
    scores = stats.success_scores
    return {
        "iteration": stats.iteration,
        "temperature": stats.temperature,
        "counts": stats.counts,
        "success_best": max(scores) if scores else None,
        "success_mean": (sum(scores) / len(scores)) if scores else None,
        "s_best_so_far": s_best,
        "chosen_hashes": [a.program.canonical_hash for a in stats.chosen],
        "pairs_built": stats.pairs_built,
        "policy_version": stats.policy_version,
        "duplicate_exact_text": stats.duplicate_exact_text,
    }


def _baselines(instance: BenchmarkInstance, budget: EvalBudget) -> dict:
    taus = instance.task_vectors()

    def dev_score(model) -> float:
        return probe_score(model, instance.dev_probes, instance.dev_baseline_mse)

    def test_score(model) -> float:
        return probe_score(model, instance.test_probes, instance.test_baseline_mse)

    evaluations = 0

    def scorer(tau) -> float:
        nonlocal evaluations
        evaluations += 1
        return dev_score(apply_merged(instance.seed_model, tau))

    lambdas, ta_dev = grid_search_task_arithmetic(taus, TASK_ARITHMETIC_GRID, scorer)
    ta_model = apply_merged(instance.seed_model, task_arithmetic(taus, lambdas))
    return {
        "seed_model": {"dev": dev_score(instance.seed_model), "test": test_score(instance.seed_model)},
        "candidates": [
            {"dev": dev_score(c), "test": test_score(c)} for c in instance.candidates
        ],
        "task_arithmetic": {
            "grid": list(TASK_ARITHMETIC_GRID),
            "lambdas": list(lambdas),
            "dev": ta_dev,
            "test": test_score(ta_model),
            "evaluations": evaluations,
        },
    }


def _generate(config: RunConfig, policy: GeneratorPolicy, temp: float, iteration: int) -> list[str]:
    if config.generator_mode == "grammar":
        return [
            sample_program(
                policy, temp,
                np.random.default_rng((config.seed, _GEN_STREAM, iteration, i)),
            )
            for i in range(config.candidates_per_iteration)
        ]
    prompt = default_prompt_template()
    return remote_generate(config.remote, prompt, temp, config.candidates_per_iteration)


def run(config: RunConfig, initial_policy: GeneratorPolicy | None = None) -> RunReport:
    """Execute a full search run, writing logs and reports to the output dir."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    bench = config.benchmark
    instance = make_instance(
        rng_seed=config.seed,
        d=bench.d,
        k=bench.k,
        component_noise=bench.component_noise,
        probe_counts=(bench.n_dev, bench.n_test),
        overlap=bench.overlap,
    )
    save_instance(instance, out / "instance.json")
    (out / "config.json").write_text(json.dumps(config_echo(config), indent=2, sort_keys=True) + "\n")

    budget = (
        EvalBudget(config.budget_steps) if config.budget_steps is not None
        else default_budget(bench.k, bench.d)
    )
    taus = instance.task_vectors()
    policy = initial_policy or GeneratorPolicy.initial(default_grammar(bench.k), config.max_depth)
    prompt_id = default_prompt_template().prompt_id
    state = RunState()

    cand_path = out / "candidates.jsonl"
    iter_path = out / "iterations.jsonl"
    pref_path = out / "preferences.jsonl"
    for path in (cand_path, iter_path, pref_path):
        path.write_text("")

    for t in range(1, config.iterations + 1):
        temp = temperature(t, config.t1, config.beta)
        candidates = _generate(config, policy, temp, t)
        outcomes = filter_candidates(
            candidates,
            set(),  # duplicate detection is per-iteration
            budget,
            taus,
            instance.seed_model,
            instance.dev_probes,
            instance.dev_baseline_mse,
            extract_from_raw=(config.generator_mode == "remote"),
            iteration=t,
            generator_kind=config.generator_mode,
        )
        with open(cand_path, "a", encoding="utf-8") as fh:
            for i, outcome in enumerate(outcomes):
                fh.write(_dumps(_candidate_record(t, i, outcome)) + "\n")

        scored = [
            ScoredAlgorithm(o.program, o.dev_score, t)
            for o in outcomes if o.category == SUCCESS
        ]
        state.all_scored.extend(scored)
        if scored:
            challenger = _ranked(scored)[0]
            if state.best is None or challenger.dev_score > state.best.dev_score:
                state.best = challenger

        pool = state.carryover_pool()
        pairs = []
        if len(scored) >= 2:
            chosen, _, _, _ = select_preference_sets(scored, pool, config.refine)
            pairs = build_preferences(
                scored, pool, config.refine,
                np.random.default_rng((config.seed, _PREF_STREAM, t)),
                prompt_id=prompt_id,
            )
        else:
            chosen = _ranked(scored)
            log.warning("iteration %d: %d success(es); skipping preference building", t, len(scored))
        write_preference_jsonl(pairs, pref_path)

        if pairs and config.generator_mode == "grammar":
            policy = refine_policy(policy, pairs, config.refine.eta)

        stats = IterationStats(
            iteration=t,
            temperature=temp,
            counts=category_counts(outcomes),
            success_scores=[a.dev_score for a in scored],
            chosen=chosen,
            pairs_built=len(pairs),
            policy_version=policy.version,
            duplicate_exact_text=exact_text_duplicates(candidates),
        )
        state.history.append(stats)
        with open(iter_path, "a", encoding="utf-8") as fh:
            fh.write(_dumps(_iteration_record(stats, state.s_best)) + "\n")

    top = select_best(state, config.top_n_for_test)
    top_test = [
        (
            alg,
            score_program(
                alg.program, taus, instance.seed_model,
                instance.test_probes, instance.test_baseline_mse, budget,
            ),
        )
        for alg in top
    ]

    report = RunReport(
        s_best=state.s_best,
        best=state.best,
        iterations=state.history,
        top_test=top_test,
        baselines=_baselines(instance, budget),
    )
    _write_result(out, config, report)
    write_reports(out)
    return report


def _write_result(out: Path, config: RunConfig, report: RunReport) -> None:
    payload = {
        "iterations": config.iterations,
        "candidates_per_iteration": config.candidates_per_iteration,
        "generator_mode": config.generator_mode,
        "s_best": report.s_best,
        "best_program": None if report.best is None else {
            "source": report.best.program.source,
            "hash": report.best.program.canonical_hash,
            "iteration": report.best.iteration,
            "dev_score": report.best.dev_score,
        },
        "top_test": [
            {
                "rank": rank + 1,
                "source": alg.program.source,
                "hash": alg.program.canonical_hash,
                "iteration": alg.iteration,
                "dev_score": alg.dev_score,
                "test_score": test,
            }
            for rank, (alg, test) in enumerate(report.top_test)
        ],
        "baselines": report.baselines,
    }
    (out / "result.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
