"""Command-line entry point.

Configuration precedence, lowest to highest: built-in defaults, the TOML
config file (``--config``), command-line flags, then environment
variables named ``POSTEDIT_<SECTION>_<KEY>`` (for example
``POSTEDIT_RUN_SEED`` or ``POSTEDIT_GENERATOR_ENDPOINT``).  Unknown
config keys are rejected.  Exit codes: 0 success, 1 usage error,
2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .actions import (
    apply_actions,
    corrupt_script,
    detokenize,
    oracle_actions,
    parse_script,
    serialize_script,
    tokenize,
    unordered_actions,
)
from .backends import (
    BackendConfig,
    BackendTrio,
    DirectEditInterpreter,
    NoisyGenerator,
    OracleProgrammer,
    Recorder,
    RemoteGenerator,
    RemoteInterpreter,
    RemoteProgrammer,
    ReplayBackend,
    derive_seed,
)
from .data import (
    ExemplarPool,
    build_pool,
    build_training_set,
    export_training_set,
    ingest,
    load_pool,
    save_pool,
)
from .errors import LengthMismatch, PosteditError, UsageError
from .metrics import MetricsReport, chrf_pp, corpus_bleu, unigram_kl
from .pipeline import RunConfig, run
from .prompts import RoleKind, TaskKind, default_templates, load_template
from .retrieval import retrieve_top_k

PROG = "postedit"

RUN_KEYS = {
    "task": str,
    "max_iterations": int,
    "stop_threshold": float,
    "generator_shots": int,
    "interpreter_shots": int,
    "corruption_rate": float,
    "seed": int,
    "malformed_policy": str,
    "closest_exemplar_last": bool,
    "exclude_self_match": bool,
    "max_workers": int,
}
BACKEND_SECTIONS = ("generator", "programmer", "interpreter")
BACKEND_KEYS = {
    "endpoint": str,
    "model": str,
    "timeout": float,
    "max_retries": int,
    "retry_base_delay_ms": float,
    "max_concurrent": int,
    "credential_env": str,
    "max_requests": int,
    "temperature": float,
    "max_tokens": int,
}
TEMPLATE_KEYS = {"generator": str, "interpreter_few": str, "interpreter_zero": str}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _coerce(value: str, target_type):
    if target_type is bool:
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"cannot parse boolean from {value!r}")
    try:
        return target_type(value)
    except ValueError as exc:
        raise UsageError(f"cannot parse {target_type.__name__} from {value!r}") from exc


def _load_config_file(path) -> dict:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    known = {"run": RUN_KEYS, "templates": TEMPLATE_KEYS}
    known.update({section: BACKEND_KEYS for section in BACKEND_SECTIONS})
    for section, values in data.items():
        if section not in known:
            raise UsageError(f"unknown config section [{section}]")
        if not isinstance(values, dict):
            raise UsageError(f"config section [{section}] must be a table")
        for key in values:
            if key not in known[section]:
                raise UsageError(f"unknown config key {section}.{key}")
    return data


def _env_overrides(section: str, keys: dict) -> dict:
    values = {}
    for key, target_type in keys.items():
        name = f"POSTEDIT_{section.upper()}_{key.upper()}"
        if name in os.environ:
            values[key] = _coerce(os.environ[name], target_type)
    return values


def _resolve_run_config(args, file_config: dict) -> RunConfig:
    values: dict = {}
    values.update(file_config.get("run", {}))
    flag_map = {
        "task": args.task,
        "seed": args.seed,
        "max_iterations": getattr(args, "max_iterations", None),
        "stop_threshold": getattr(args, "stop_threshold", None),
        "generator_shots": getattr(args, "shots_generator", None),
        "interpreter_shots": getattr(args, "shots_interpreter", None),
        "corruption_rate": getattr(args, "corruption_rate", None),
        "malformed_policy": getattr(args, "malformed_policy", None),
        "max_workers": getattr(args, "max_workers", None),
    }
    values.update({k: v for k, v in flag_map.items() if v is not None})
    values.update(_env_overrides("run", RUN_KEYS))
    task = TaskKind(values.pop("task", "MT"))
    if "generator_shots" in values or "interpreter_shots" in values:
        return RunConfig(task=task, **values)
    return RunConfig.for_task(task, **values)


def _resolve_backend_config(role: str, args, file_config: dict) -> BackendConfig:
    values: dict = {}
    values.update(file_config.get(role, {}))
    endpoint = getattr(args, f"{role}_endpoint", None) or getattr(args, "endpoint", None)
    model = getattr(args, f"{role}_model", None) or getattr(args, "model", None)
    if endpoint is not None:
        values["endpoint"] = endpoint
    if model is not None:
        values["model"] = model
    values.update(_env_overrides(role, BACKEND_KEYS))
    return BackendConfig(**values)


def _resolve_templates(args, file_config: dict, task: TaskKind):
    templates = default_templates(task)
    section = dict(file_config.get("templates", {}))
    section.update(_env_overrides("templates", TEMPLATE_KEYS))
    paths = {
        RoleKind.GENERATOR: section.get("generator"),
        RoleKind.INTERPRETER_FEW_SHOT: section.get("interpreter_few"),
        RoleKind.INTERPRETER_ZERO_SHOT: section.get("interpreter_zero"),
    }
    for role, path in paths.items():
        if path:
            templates[role] = load_template(path)
    return templates


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _write_lines(lines, path) -> None:
    if path is None:
        for line in lines:
            print(line)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")


def _references_for(batch, args):
    if getattr(args, "refs", None):
        refs_lines = _read_lines(args.refs)
        if len(refs_lines) != len(batch):
            raise LengthMismatch(
                f"{len(batch)} batch lines vs {len(refs_lines)} reference lines"
            )
        return refs_lines
    return None


def _validate_backend_args(args, have_refs: bool) -> None:
    if args.backend == "replay" and not args.replay_file:
        raise UsageError("--backend replay requires --replay-file")
    if args.backend in ("oracle", "noisy") and not have_refs:
        raise UsageError(f"--backend {args.backend} requires --refs")


def _build_trio(args, run_config, file_config, refs_by_x) -> tuple[BackendTrio, Recorder | None]:
    choice = args.backend
    recorder = None
    if choice == "replay":
        if not args.replay_file:
            raise UsageError("--backend replay requires --replay-file")
        backend = ReplayBackend(args.replay_file)
        trio = BackendTrio(backend, backend, backend)
    elif choice in ("oracle", "noisy"):
        if refs_by_x is None:
            raise UsageError(f"--backend {choice} requires --refs")
        noise = args.noise if args.noise is not None else (0.0 if choice == "oracle" else 0.3)
        trio = BackendTrio(
            generator=NoisyGenerator(refs_by_x, noise=noise, seed=run_config.seed),
            programmer=OracleProgrammer(refs_by_x),
            interpreter=DirectEditInterpreter(),
        )
    elif choice == "remote":
        trio = BackendTrio(
            generator=RemoteGenerator(_resolve_backend_config("generator", args, file_config)),
            programmer=RemoteProgrammer(_resolve_backend_config("programmer", args, file_config)),
            interpreter=RemoteInterpreter(_resolve_backend_config("interpreter", args, file_config)),
        )
    elif choice == "direct":
        trio = BackendTrio(
            generator=RemoteGenerator(_resolve_backend_config("generator", args, file_config)),
            programmer=RemoteProgrammer(_resolve_backend_config("programmer", args, file_config)),
            interpreter=DirectEditInterpreter(),
        )
    else:
        raise UsageError(f"unknown backend {choice!r}")
    if getattr(args, "record_file", None):
        recorder = Recorder(trio.generator, trio.programmer, trio.interpreter)
        trio = BackendTrio(recorder, recorder, recorder)
    return trio, recorder


# --- subcommand handlers -----------------------------------------------------


def _cmd_extract_actions(args) -> int:
    hyps = _read_lines(args.hyp)
    refs = _read_lines(args.ref)
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypothesis lines vs {len(refs)} reference lines")
    extract = unordered_actions if args.unordered else oracle_actions
    lines = [
        serialize_script(extract(tokenize(h), tokenize(r)), with_positions=args.positions)
        for h, r in zip(hyps, refs)
    ]
    _write_lines(lines, args.out)
    return 0


def _cmd_apply_actions(args) -> int:
    hyps = _read_lines(args.hyp)
    scripts = _read_lines(args.scripts)
    if len(hyps) != len(scripts):
        raise LengthMismatch(f"{len(hyps)} hypothesis lines vs {len(scripts)} script lines")
    lines = [
        detokenize(apply_actions(tokenize(h), parse_script(s)))
        for h, s in zip(hyps, scripts)
    ]
    _write_lines(lines, args.out)
    return 0


def _cmd_corrupt(args) -> int:
    scripts = [parse_script(line) for line in _read_lines(args.scripts)]
    donors = []
    if args.donors:
        quads, _ = load_pool(args.donors)
        donors = ExemplarPool(quads).donor_actions
    lines = [
        serialize_script(
            corrupt_script(script, args.rate, donors, derive_seed(args.seed, line_no)),
            with_positions=True,
        )
        for line_no, script in enumerate(scripts)
    ]
    _write_lines(lines, args.out)
    return 0


def _cmd_build_pool(args) -> int:
    _validate_backend_args(args, have_refs=True)  # pair references are built in
    file_config = _load_config_file(args.config) if args.config else {}
    run_config = _resolve_run_config(args, file_config)
    templates = _resolve_templates(args, file_config, run_config.task)
    pairs = ingest(args.pairs, args.format)
    refs_by_x = {pair.x: pair.y for pair in pairs}
    trio, recorder = _build_trio(args, run_config, file_config, refs_by_x)
    quads = build_pool(pairs, trio.generator, run_config, templates)
    provenance = {
        "backend": getattr(trio.generator, "backend_id", args.backend),
        "seed": run_config.seed,
    }
    save_pool(quads, args.out, provenance)
    if recorder and args.record_file:
        recorder.save(args.record_file)
    print(f"wrote {len(quads)} pool entries to {args.out}")
    return 0


def _cmd_build_trainset(args) -> int:
    quads, _ = load_pool(args.pool)
    augment = args.augment if args.augment is not None else round(0.1 * len(quads))
    instances = build_training_set(quads, augment, seed=args.seed or 0)
    export_training_set(instances, args.out)
    print(f"wrote {len(instances)} training instances ({augment} augmented) to {args.out}")
    return 0


def _cmd_retrieve(args) -> int:
    quads, _ = load_pool(args.pool)
    pool = ExemplarPool(quads)
    exclude = pool.ids_matching_x(args.query) if args.exclude_self else None
    hits = retrieve_top_k(pool.index, args.query, args.k, exclude=exclude)
    _write_lines([f"{entry_id}\t{score:.6f}" for entry_id, score in hits], args.out)
    return 0


def _cmd_refine(args) -> int:
    _validate_backend_args(args, have_refs=bool(args.refs))
    file_config = _load_config_file(args.config) if args.config else {}
    run_config = _resolve_run_config(args, file_config)
    templates = _resolve_templates(args, file_config, run_config.task)
    batch = _read_lines(args.batch)
    references = _references_for(batch, args)
    refs_by_x = dict(zip(batch, references)) if references is not None else None
    quads, _ = load_pool(args.pool)
    pool = ExemplarPool(quads)
    trio, recorder = _build_trio(args, run_config, file_config, refs_by_x)
    report = run(batch, pool, trio, run_config, references=references, templates=templates)
    if recorder and args.record_file:
        recorder.save(args.record_file)
    if args.out:
        report.save(args.out)
    else:
        sys.stdout.write(report.to_json())
    for row in report.iterations:
        rate = row["noaction_rate"]
        rate_text = f"{100 * rate:.2f}%" if rate is not None else "-"
        metrics = row["metrics"] or {}
        metric_text = " ".join(f"{k}={v:.2f}" for k, v in sorted(metrics.items()))
        print(f"iteration {row['iteration']}: noaction {rate_text} {metric_text}".rstrip())
    return 0


def _cmd_evaluate(args) -> int:
    hyps = _read_lines(args.hyp)
    refs = _read_lines(args.ref)
    report = MetricsReport(
        bleu=corpus_bleu(hyps, refs, sentence_level=args.sentence_level),
        chrfpp=chrf_pp(hyps, refs),
    )
    print(report.render_table())
    if args.json:
        with open(args.json, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def _cmd_divergence(args) -> int:
    value = unigram_kl(_read_lines(args.p), _read_lines(args.q), alpha=args.alpha)
    print(f"{value:.6f}")
    return 0


# --- parser -------------------------------------------------------------------


def _add_common_run_flags(parser) -> None:
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--seed", type=int, default=None, help="run seed (controls all randomness)")
    parser.add_argument("--task", choices=[t.value for t in TaskKind], default=None)
    parser.add_argument("--max-iterations", type=int, default=None)
    parser.add_argument("--stop-threshold", type=float, default=None)
    parser.add_argument("--shots-generator", type=int, default=None)
    parser.add_argument("--shots-interpreter", type=int, default=None)
    parser.add_argument("--corruption-rate", type=float, default=None)
    parser.add_argument("--malformed-policy", choices=["retain", "fail"], default=None)
    parser.add_argument("--max-workers", type=int, default=None)
    parser.add_argument(
        "--backend",
        required=True,
        choices=["remote", "replay", "oracle", "noisy", "direct"],
        help="backend preset; remote-touching presets need explicit endpoints",
    )
    parser.add_argument("--replay-file", help="JSONL of recorded responses (replay backend)")
    parser.add_argument("--record-file", help="write every backend exchange here for replay")
    parser.add_argument("--noise", type=float, default=None, help="noise rate for the offline generator")
    for role in BACKEND_SECTIONS:
        parser.add_argument(f"--{role}-model", default=None, help=f"{role} model identifier")
        parser.add_argument(f"--{role}-endpoint", default=None, help=f"{role} endpoint URL")


def build_parser() -> _Parser:
    parser = _Parser(prog=PROG, description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-actions", help="edit scripts turning hypothesis lines into reference lines")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--unordered", action="store_true", help="bag-of-words scripts instead of ordered ones")
    p.add_argument("--positions", action="store_true", help="serialize positions")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(handler=_cmd_extract_actions)

    p = sub.add_parser("apply-actions", help="apply script lines to hypothesis lines")
    p.add_argument("--hyp", required=True)
    p.add_argument("--scripts", required=True)
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(handler=_cmd_apply_actions)

    p = sub.add_parser("corrupt", help="drop/swap actions in script lines")
    p.add_argument("--scripts", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--donors", help="pool file supplying swap donors")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(handler=_cmd_corrupt)

    p = sub.add_parser("build-pool", help="generate y* for each pair and store the exemplar pool")
    p.add_argument("--pairs", required=True)
    p.add_argument("--format", choices=["tsv", "jsonl"], required=True)
    p.add_argument("--out", required=True)
    _add_common_run_flags(p)
    p.set_defaults(handler=_cmd_build_pool)

    p = sub.add_parser("build-trainset", help="synthesize programmer training data from a pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--augment", type=int, default=None, help="identical-pair count (default: 10%% of pool)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_build_trainset)

    p = sub.add_parser("retrieve", help="top-k pool entries for a query")
    p.add_argument("--pool", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--exclude-self", action="store_true")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(handler=_cmd_retrieve)

    p = sub.add_parser("refine", help="full generate/program/interpret refinement run")
    p.add_argument("--batch", required=True, help="file with one input per line")
    p.add_argument("--refs", help="aligned references (enables metrics and offline backends)")
    p.add_argument("--pool", required=True)
    p.add_argument("--out", help="report JSON path (default: stdout)")
    _add_common_run_flags(p)
    p.set_defaults(handler=_cmd_refine)

    p = sub.add_parser("evaluate", help="corpus BLEU and ChrF++ for aligned files")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--sentence-level", action="store_true")
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("divergence", help="unigram KL divergence between two corpora")
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--alpha", type=float, default=1e-4)
    p.set_defaults(handler=_cmd_divergence)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        print(f"run '{PROG} --help' for usage", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return 0 if exc.code in (0, None) else 1
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return 1
    except (PosteditError, OSError, json.JSONDecodeError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
