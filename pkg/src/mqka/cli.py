"""``mqka`` command line: run, attack, feasibility, report.

Exit codes: 0 success, 2 detection abort, 3 infeasible collusion plan,
4 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .adversary import (
    AttackPlan,
    Fallback,
    Variant,
    feasible,
    run_collusion,
    run_collusive_circle,
    run_halfcircle_attack,
    run_tree_attack,
)
from .analysis import ExperimentConfig, build_fairness_matrix, default_sweep, emit_report
from .errors import ConfigError, DetectionAbort, FeasibilityError, StructuralError
from .keycore import Key
from .protocols import RunOutcome, Verdict, run_cgt, run_circle, run_half_circle, run_tree
from .topology import Kind, circular_gaps

log = logging.getLogger("mqka")

EXIT_OK, EXIT_DETECTION, EXIT_FEASIBILITY, EXIT_CONFIG = 0, 2, 3, 4


def _colluders(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"colluders must be comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqka", description="Multi-party quantum key agreement simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
        p.add_argument("--topology", choices=["complete", "circle", "half-circle", "tree"])
        p.add_argument("--n", type=int)
        p.add_argument("--key-len", type=int, dest="key_len")
        p.add_argument("--decoys", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--shots", type=int, help="tree: number of GHZ shots")
        p.add_argument("--picks", type=int, help="tree: detection picks per honest party")
        p.add_argument("--out")

    run = sub.add_parser("run", help="honest execution of one archetype")
    common(run)
    run.add_argument("--keys", help="comma-separated personal keys (hex, or 0b-binary)")

    attack = sub.add_parser("attack", help="collusive attack run")
    common(attack)
    attack.add_argument("--colluders", type=_colluders)
    attack.add_argument("--expect", dest="expected", help="target key (hex, or 0b-binary)")
    attack.add_argument("--keys", help="comma-separated personal keys")
    attack.add_argument("--policy", choices=["earliest", "latest"], default="earliest")
    attack.add_argument("--fallback", choices=[f.value for f in Fallback], default="abstain")
    attack.add_argument("--force", action="store_true", help="run circle plans that fail the gap rule")

    feas = sub.add_parser("feasibility", help="gap rule verdict for a colluder set")
    feas.add_argument("--n", type=int, required=True)
    feas.add_argument("--colluders", type=_colluders, required=True)

    report = sub.add_parser("report", help="fairness matrix over the four archetypes")
    common(report)
    report.add_argument("--format", choices=["json", "csv", "markdown", "markdown-table"])
    return parser


def _config(args: argparse.Namespace, **defaults) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig(**defaults)
    overrides = {
        k: getattr(args, k)
        for k in ("topology", "n", "key_len", "decoys", "seed", "trials", "shots", "picks", "out",
                  "colluders", "expected", "format")
        if getattr(args, k, None) is not None
    }
    try:
        return replace(base, **overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _parse_keys(text: str | None, cfg: ExperimentConfig) -> list[Key] | None:
    if text is None:
        return None
    keys = [Key.parse(part, cfg.key_len) for part in text.split(",")]
    if len(keys) != cfg.n:
        raise ConfigError(f"--keys lists {len(keys)} keys for {cfg.n} participants")
    return keys


def _write(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _payload(cfg: ExperimentConfig, outcome: RunOutcome, command: str) -> dict:
    body = outcome.to_dict()
    body.update({"command": command, "topology": cfg.topology, "n": cfg.n, "key_len": cfg.key_len,
                 "decoys": cfg.decoys, "seed": cfg.seed})
    return body


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config(args)
    rng = cfg.rng("run")
    keys = _parse_keys(args.keys, cfg)
    try:
        if cfg.topology == "tree":
            shots = cfg.shots or cfg.key_len + cfg.n * cfg.picks
            outcome = run_tree(cfg.n, shots, cfg.key_len, [cfg.picks] * cfg.n, rng)
        else:
            runner = {"complete": lambda: run_cgt(cfg.n, keys, cfg.key_len, rng, cfg.decoys),
                      "circle": lambda: run_circle(cfg.n, keys, cfg.key_len, cfg.decoys, rng),
                      "half-circle": lambda: run_half_circle(cfg.n, keys, cfg.key_len, cfg.decoys, rng)}
            outcome = runner[cfg.topology]()
    except DetectionAbort as exc:
        _write({"command": "run", "aborted": str(exc), "period": exc.period, "edge": list(exc.edge)}, cfg.out)
        return EXIT_DETECTION
    _write(_payload(cfg, outcome, "run"), cfg.out)
    return EXIT_OK


def cmd_attack(args: argparse.Namespace) -> int:
    cfg = _config(args)
    rng = cfg.rng("attack")
    if cfg.topology == "tree":
        colluders = cfg.colluders or (0, 2)
        expected = Key.parse(cfg.expected, cfg.key_len) if cfg.expected else Key.random(cfg.key_len, rng)
        honest = cfg.n - len(set(colluders))
        shots = cfg.shots or cfg.key_len + cfg.n * cfg.picks
        colluder_picks = shots - cfg.key_len - honest * cfg.picks
        outcome = run_tree_attack(shots, cfg.key_len, cfg.picks, colluder_picks, expected, rng,
                                  n_parties=cfg.n, colluders=colluders)
    else:
        if not cfg.colluders:
            raise ConfigError("--colluders is required")
        keys = _parse_keys(args.keys, cfg) or [Key.random(cfg.key_len, rng) for _ in range(cfg.n)]
        expected = Key.parse(cfg.expected, cfg.key_len) if cfg.expected else Key.random(cfg.key_len, rng)
        if cfg.topology == "circle":
            plan = AttackPlan.circle(cfg.colluders, expected)
            outcome = run_collusive_circle(cfg.n, keys, plan, cfg.key_len, cfg.decoys, rng,
                                           args.policy, args.fallback, args.force)
        elif cfg.topology == "half-circle":
            plan = AttackPlan(cfg.colluders, expected, Variant.HALF_CIRCLE_THREE_COLLUDER)
            outcome = run_halfcircle_attack(cfg.n, keys, plan, rng, cfg.decoys, args.policy)
        else:
            outcome = run_collusion(Kind.COMPLETE, cfg.n, keys, cfg.colluders, expected, cfg.decoys, rng,
                                    args.policy, args.fallback)
    _write(_payload(cfg, outcome, "attack"), cfg.out)
    log.info("verdict: %s", outcome.verdict.value)
    return EXIT_DETECTION if outcome.verdict is Verdict.ABORTED else EXIT_OK


def cmd_feasibility(args: argparse.Namespace) -> int:
    gaps = circular_gaps(args.n, args.colluders)
    bound = (args.n + 1) // 2
    ok = feasible(args.n, args.colluders)
    print(f"gaps: {gaps}")
    print(f"longest gap {max(gaps)} vs bound {bound}: {'feasible' if ok else 'infeasible'}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _config(args)
    fmt = cfg.format if args.config or args.format else "markdown"
    trials = args.trials or 256
    report = build_fairness_matrix(default_sweep(cfg.seed, trials), seed=cfg.seed)
    text = emit_report(report, fmt, cfg.out)
    if not cfg.out:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handlers = {"run": cmd_run, "attack": cmd_attack, "feasibility": cmd_feasibility, "report": cmd_report}
    try:
        return handlers[args.command](args)
    except FeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_FEASIBILITY
    except (ConfigError, StructuralError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
