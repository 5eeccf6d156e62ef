"""Iterative refinement loop: generate, predict actions, apply, repeat.

Iteration bookkeeping follows the per-iteration reporting convention:
report row ``i`` carries the metrics of the texts ``y^i`` together with
the fraction of NoAction predictions made *on* ``y^i`` (known once the
next step has run; the final row's fraction may be absent).  The loop
stops once that fraction strictly exceeds the stop threshold, when every
instance is frozen, or at the iteration cap.  Frozen instances are never
modified; the batch-level fraction counts them as NoAction.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .actions import NO_ACTION, ActionScript, corrupt_script, serialize_script
from .backends import BackendTrio, derive_seed
from .data import ExemplarPool, PairPool
from .errors import BackendError, ConfigError, ParseError, SkippedEdit
from .metrics import chrf_pp, corpus_bleu
from .prompts import (
    PromptTemplate,
    RoleKind,
    TaskKind,
    build_generator_prompt,
    build_interpreter_prompt,
    default_templates,
)
from .retrieval import retrieve_top_k


@dataclass(frozen=True)
class RunConfig:
    task: TaskKind = TaskKind.MT
    max_iterations: int = 15
    stop_threshold: float = 0.95
    generator_shots: int = 0
    interpreter_shots: int = 10
    corruption_rate: float = 0.5
    seed: int = 0
    malformed_policy: str = "retain"
    closest_exemplar_last: bool = True
    exclude_self_match: bool = True
    max_workers: int = 1

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1: {self.max_iterations}")
        if not 0.0 <= self.stop_threshold <= 1.0:
            raise ConfigError(f"stop_threshold must be in [0, 1]: {self.stop_threshold}")
        if not 0.0 <= self.corruption_rate <= 1.0:
            raise ConfigError(f"corruption_rate must be in [0, 1]: {self.corruption_rate}")
        if self.generator_shots < 0 or self.interpreter_shots < 0:
            raise ConfigError("shot counts must be >= 0")
        if self.malformed_policy not in ("retain", "fail"):
            raise ConfigError(f"malformed_policy must be 'retain' or 'fail': {self.malformed_policy}")
        if self.max_workers < 1:
            raise ConfigError(f"max_workers must be >= 1: {self.max_workers}")

    @classmethod
    def for_task(cls, task: TaskKind, **overrides) -> "RunConfig":
        """Task defaults: 0 generator / 10 interpreter shots for MT,
        5 / 5 for logical-form-to-text."""
        shots = {TaskKind.MT: (0, 10), TaskKind.LF_TO_TEXT: (5, 5)}[task]
        values = dict(task=task, generator_shots=shots[0], interpreter_shots=shots[1])
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class HistoryEntry:
    iteration: int
    text: str
    actions: str | None  # serialized script that produced this text


@dataclass
class RefinementState:
    instance_id: int | str
    x: str
    iteration: int = 0
    text: str = ""
    last_script: ActionScript | None = None
    frozen: bool = False
    error: str | None = None
    note: str | None = None
    history: list[HistoryEntry] = field(default_factory=list)

    def text_at(self, iteration: int) -> str:
        """The instance's text as of a report iteration (frozen texts persist)."""
        current = self.history[0].text
        for entry in self.history:
            if entry.iteration > iteration:
                break
            current = entry.text
        return current


@dataclass(frozen=True)
class StepOutcome:
    noaction_fraction: float
    edited_count: int


def _map_states(fn: Callable, items: Sequence, max_workers: int) -> list:
    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def _templates_for(config: RunConfig, templates) -> dict[RoleKind, PromptTemplate]:
    return templates if templates is not None else default_templates(config.task)


def generate_initial(
    batch: Sequence[str],
    pool: PairPool,
    generator,
    config: RunConfig,
    templates: dict[RoleKind, PromptTemplate] | None = None,
) -> list[RefinementState]:
    """Produce each instance's initial text with retrieved few-shot pairs.

    A failed instance is frozen with an error tag; the batch continues.
    """
    templates = _templates_for(config, templates)

    def start(indexed: tuple[int, str]) -> RefinementState:
        position, x = indexed
        state = RefinementState(instance_id=position, x=x)
        try:
            exclude = pool.ids_matching_x(x) if config.exclude_self_match else None
            hits = retrieve_top_k(pool.index, x, config.generator_shots, exclude=exclude)
            if config.closest_exemplar_last:
                hits = hits[::-1]
            exemplars = [pool.pair(entry_id) for entry_id, _ in hits]
            prompt = build_generator_prompt(x, exemplars, templates[RoleKind.GENERATOR])
            state.text = generator.generate(prompt)
        except BackendError as exc:
            state.frozen = True
            state.error = f"generator-error: {exc}"
            state.text = ""
        state.history.append(HistoryEntry(0, state.text, None))
        return state

    return _map_states(start, list(enumerate(batch)), config.max_workers)


def refine_step(
    states: Sequence[RefinementState],
    pool: ExemplarPool,
    trio: BackendTrio,
    config: RunConfig,
    templates: dict[RoleKind, PromptTemplate] | None = None,
) -> StepOutcome:
    """One programmer/interpreter pass over all unfrozen instances.

    NoAction predictions freeze their instance.  The returned fraction is
    computed over the whole batch, frozen instances counting as NoAction.
    """
    templates = _templates_for(config, templates)
    role = (
        RoleKind.INTERPRETER_FEW_SHOT
        if config.interpreter_shots > 0
        else RoleKind.INTERPRETER_ZERO_SHOT
    )

    def advance(state: RefinementState) -> None:
        if state.frozen:
            return
        try:
            script = trio.programmer.predict_actions(state.x, state.text)
        except ParseError as exc:
            if config.malformed_policy == "fail":
                raise
            state.frozen = True
            state.last_script = NO_ACTION
            state.note = f"malformed-script: {exc}"
            return
        except BackendError as exc:
            state.frozen = True
            state.error = f"programmer-error: {exc}"
            return
        state.last_script = script
        if script.is_noaction:
            state.frozen = True
            return
        try:
            exclude = pool.ids_matching_x(state.x) if config.exclude_self_match else None
            hits = retrieve_top_k(
                pool.index, state.x, config.interpreter_shots, exclude=exclude
            )
            if config.closest_exemplar_last:
                hits = hits[::-1]
            exemplars = []
            for entry_id, _ in hits:
                quad = pool.quad(entry_id)
                corrupted = corrupt_script(
                    quad.a_star,
                    config.corruption_rate,
                    pool.donor_actions,
                    derive_seed(config.seed, entry_id),
                )
                exemplars.append((quad.x, quad.y_star, corrupted, quad.y))
            prompt = build_interpreter_prompt(
                state.x, state.text, script, exemplars, templates[role]
            )
            try:
                new_text = trio.interpreter.edit(prompt, (state.text, script))
            except SkippedEdit as exc:
                state.note = f"skipped-edit: {exc}"
                new_text = state.text
            state.iteration += 1
            state.text = new_text
            state.history.append(
                HistoryEntry(
                    state.iteration,
                    new_text,
                    serialize_script(script, with_positions=True),
                )
            )
        except BackendError as exc:
            state.frozen = True
            state.error = f"interpreter-error: {exc}"

    _map_states(advance, list(states), config.max_workers)
    noaction = sum(
        1
        for s in states
        if s.frozen or (s.last_script is not None and s.last_script.is_noaction)
    )
    edited = sum(
        1
        for s in states
        if not s.frozen and s.last_script is not None and not s.last_script.is_noaction
    )
    return StepOutcome(noaction_fraction=noaction / len(states), edited_count=edited)


@dataclass
class RunReport:
    config: dict
    iterations: list[dict]
    instances: list[dict]
    steps: int = 0  # refine steps executed (a step may edit nothing)

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "steps": self.steps,
            "iterations": self.iterations,
            "instances": self.instances,
        }
        return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())

    @property
    def final_iteration(self) -> int:
        return self.iterations[-1]["iteration"]

    def final_texts(self) -> list[str]:
        return [instance["final_text"] for instance in self.instances]


def _config_echo(config: RunConfig) -> dict:
    echo = dataclasses.asdict(config)
    echo["task"] = config.task.value
    return echo


def _metrics_row(states: Sequence[RefinementState], references, iteration: int):
    if references is None:
        return None
    texts = [state.text_at(iteration) for state in states]
    return {
        "bleu": corpus_bleu(texts, list(references)),
        "chrfpp": chrf_pp(texts, list(references)),
    }


def run(
    batch: Sequence[str],
    pool: ExemplarPool,
    trio: BackendTrio,
    config: RunConfig,
    references: Sequence[str] | None = None,
    templates: dict[RoleKind, PromptTemplate] | None = None,
) -> RunReport:
    """Full refinement run; returns the per-iteration report.

    With ``references`` supplied (aligned with ``batch``), every report row
    carries corpus BLEU and ChrF++ of that iteration's texts.
    """
    if references is not None and len(references) != len(batch):
        raise ConfigError("references must align one-to-one with the batch")
    states = generate_initial(batch, pool, trio.generator, config, templates)
    rows: list[dict] = []
    steps = 0
    if states:
        rows.append(
            {
                "iteration": 0,
                "noaction_rate": None,
                "metrics": _metrics_row(states, references, 0),
            }
        )
    for step in range(1, config.max_iterations + 1):
        if not states or all(s.frozen for s in states):
            break
        outcome = refine_step(states, pool, trio, config, templates)
        steps = step
        rows[-1]["noaction_rate"] = outcome.noaction_fraction
        if outcome.edited_count > 0:
            rows.append(
                {
                    "iteration": rows[-1]["iteration"] + 1,
                    "noaction_rate": None,
                    "metrics": _metrics_row(states, references, rows[-1]["iteration"] + 1),
                }
            )
        if outcome.noaction_fraction > config.stop_threshold:
            break

    instances = [
        {
            "id": state.instance_id,
            "x": state.x,
            "final_text": state.text,
            "iteration": state.iteration,
            "frozen": state.frozen,
            "error": state.error,
            "note": state.note,
            "history": [dataclasses.asdict(entry) for entry in state.history],
        }
        for state in states
    ]
    return RunReport(
        config=_config_echo(config), iterations=rows, instances=instances, steps=steps
    )
