"""Fairness sweeps over the four archetypes and report emission.

A cell (archetype, attack class) is judged by the best attack in its
strategy family. For every strategy and target key we count the instances in
which every honest participant ends on the target with no detection. A
participant acting at random lands on a given L-bit target with probability
2**-L; the cell is unfair when the best rate clears that chance level by more
than three binomial standard deviations.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import random
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

from .adversary import run_collusion, run_lone_attack, run_tree_attack, tree_control_rate
from .errors import ConfigError
from .keycore import Key
from .protocols import Verdict
from .topology import Kind

ARCHETYPES = ("complete", "circle", "half-circle", "tree")
ATTACKS = ("single", "collusive")

CATEGORY_LABELS = {
    "complete": "CGT",
    "circle": "CT",
    "half-circle": "CT (half-circle)",
    "tree": "TT/CCGT",
}
COMMENTS = {
    "complete": "keys travel on direct pairwise channels",
    "circle": "one sequence per owner runs the whole ring",
    "half-circle": "two sequences per owner, each runs half the ring",
    "tree": "effect depends on the share of detection shots picked last",
}


@dataclass
class ExperimentConfig:
    topology: str = "circle"
    n: int = 6
    key_len: int = 128
    decoys: int = 16
    trials: int = 1
    seed: int = 0
    attack: str | None = None
    colluders: tuple[int, ...] | None = None
    expected: str | None = None
    shots: int | None = None
    picks: int = 1
    format: str = "json"
    out: str | None = None

    def __post_init__(self):
        if self.topology not in ARCHETYPES:
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.attack is not None and self.attack not in ATTACKS:
            raise ConfigError(f"unknown attack class {self.attack!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n < 3:
            raise ConfigError("need at least 3 participants")
        if self.key_len < 1 or self.decoys < 0:
            raise ConfigError("key length must be >= 1 and decoys >= 0")
        if self.colluders is not None:
            self.colluders = tuple(int(c) for c in self.colluders)
            if any(not 0 <= c < self.n for c in self.colluders):
                raise ConfigError(f"colluders {self.colluders} outside 0..{self.n - 1}")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def rng(self, *salt: object) -> random.Random:
        return random.Random(":".join(map(str, (self.seed, *salt))))


def default_sweep(seed: int = 0, trials: int = 256) -> list[ExperimentConfig]:
    """Small instances for every (archetype, attack) cell at L=2."""
    base = dict(key_len=2, decoys=8, trials=trials, seed=seed)
    return [
        ExperimentConfig("complete", 4, attack="single", **base),
        ExperimentConfig("complete", 4, attack="collusive", colluders=(0, 2), **base),
        ExperimentConfig("circle", 5, attack="single", **base),
        ExperimentConfig("circle", 6, attack="collusive", colluders=(0, 3), **base),
        ExperimentConfig("half-circle", 5, attack="single", **base),
        ExperimentConfig("half-circle", 6, attack="collusive", colluders=(0, 2, 4), **base),
        ExperimentConfig("tree", 3, attack="single", colluders=(0,), shots=5, **base),
        ExperimentConfig("tree", 3, attack="collusive", colluders=(0, 2), shots=5, **base),
    ]


@dataclass
class Cell:
    archetype: str
    attack: str
    n: int
    key_len: int
    best_strategy: str
    best_rate: float
    baseline: float
    threshold: float
    fair: bool
    runs: int
    detections: int
    instances: int
    evidence: list[str]

    @property
    def verdict(self) -> str:
        return "fair" if self.fair else "unfair"


@dataclass
class FairnessReport:
    cells: list[Cell]
    seed: int
    tree_control_curve: list[dict] = field(default_factory=list)

    def rows(self) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for cell in self.cells:
            row = out.setdefault(cell.archetype, {"evidence": []})
            row[f"fair_vs_{cell.attack}"] = cell.fair
            row["evidence"].extend(cell.evidence)
        return out

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "rows": self.rows(),
            "cells": [asdict(c) for c in self.cells],
            "tree_control_curve": self.tree_control_curve,
        }

    @classmethod
    def from_dict(cls, data: dict) -> FairnessReport:
        return cls(
            cells=[Cell(**c) for c in data["cells"]],
            seed=data["seed"],
            tree_control_curve=data.get("tree_control_curve", []),
        )


def _honest_assignments(
    n: int, dishonest: Sequence[int], length: int, cap: int, rng: random.Random
) -> list[list[Key]]:
    """Every honest-key assignment when there are at most ``cap``, else ``cap`` random ones."""
    honest = [i for i in range(n) if i not in dishonest]
    fixed = {c: Key.random(length, rng) for c in dishonest}
    total_bits = length * len(honest)

    def build(values: Iterable[int]) -> list[Key]:
        keys = dict(fixed)
        keys.update({h: Key(v, length) for h, v in zip(honest, values)})
        return [keys[i] for i in range(n)]

    if total_bits <= 30 and (1 << total_bits) <= cap:
        return [build(vals) for vals in itertools.product(range(1 << length), repeat=len(honest))]
    return [build(rng.getrandbits(length) for _ in honest) for _ in range(cap)]


def _judge(rates: dict[str, float], instances: int, length: int) -> tuple[str, float, float, float, bool]:
    baseline = 2.0 ** -length
    threshold = baseline + 3 * math.sqrt(baseline * (1 - baseline) / instances)
    best = max(sorted(rates), key=lambda s: rates[s])
    return best, rates[best], baseline, threshold, rates[best] <= threshold


def _routed_cell(cfg: ExperimentConfig) -> Cell:
    kind = Kind(cfg.topology)
    length = cfg.key_len
    rng = cfg.rng(cfg.topology, cfg.attack)
    targets = [Key(v, length) for v in range(1 << length)] if length <= 4 else [Key.random(length, rng) for _ in range(4)]
    if cfg.attack == "single":
        attacker = (cfg.colluders or (0,))[0]
        dishonest: tuple[int, ...] = (attacker,)
    else:
        dishonest = cfg.colluders or (0, cfg.n // 2)
    instances = _honest_assignments(cfg.n, dishonest, length, cfg.trials, rng)

    hits: dict[str, int] = {}
    detections = runs = 0
    ids: dict[str, list[str]] = {}

    def record(name: str, idx: int, outcome, target_list: Sequence[Key]) -> None:
        nonlocal detections, runs
        runs += 1
        ids.setdefault(name, []).append(f"{cfg.topology}/{cfg.attack}/{name}/{idx:04d}")
        if outcome.verdict is Verdict.ABORTED:
            detections += 1
            return
        honest = {k for i, k in outcome.final_keys.items() if i not in dishonest}
        for target in target_list:
            label = f"{name}->{target.serialize()}"
            hits.setdefault(label, 0)
            hits[label] += honest == {target}

    if cfg.attack == "single":
        strategies = [("measure", Key.zeros(length))]
        strategies += [("shift", Key(v, length)) for v in range(1 << min(length, 4))]
        strategies += [("blind", Key(v, length)) for v in range(1, 1 << min(length, 4))]
        for strategy, delta in strategies:
            name = f"{strategy}:{delta.serialize()}"
            for idx, keys in enumerate(instances):
                outcome = run_lone_attack(kind, cfg.n, keys, attacker, strategy, delta, targets[0],
                                          cfg.decoys, cfg.rng(name, idx))
                record(name, idx, outcome, targets)
    else:
        for target in targets:
            name = f"collusion:{target.serialize()}"
            for idx, keys in enumerate(instances):
                outcome = run_collusion(kind, cfg.n, keys, dishonest, target, cfg.decoys, cfg.rng(name, idx))
                record(name, idx, outcome, [target])

    rates = {label: count / len(instances) for label, count in hits.items()}
    best, rate, baseline, threshold, fair = _judge(rates, len(instances), length)
    return Cell(cfg.topology, cfg.attack, cfg.n, length, best, rate, baseline, threshold, fair,
                runs, detections, len(instances), ids[best.split("->")[0]][:5])


def _tree_cell(cfg: ExperimentConfig) -> Cell:
    length = cfg.key_len
    dishonest = tuple(cfg.colluders or ((0,) if cfg.attack == "single" else (0, 2)))
    honest_count = cfg.n - len(dishonest)
    shots = cfg.shots or length + cfg.n * cfg.picks
    colluder_picks = shots - length - honest_count * cfg.picks
    targets = [Key(v, length) for v in range(1 << length)]
    hits = {t.serialize(): 0 for t in targets}
    ids, runs = [], 0
    for idx in range(cfg.trials):
        for target in targets:
            rng = cfg.rng("tree", cfg.attack, idx)
            outcome = run_tree_attack(shots, length, cfg.picks, colluder_picks, target, rng,
                                      n_parties=cfg.n, colluders=dishonest)
            runs += 1
            hits[target.serialize()] += outcome.verdict is Verdict.CONTROLLED
        ids.append(f"tree/{cfg.attack}/detection-choice/{idx:04d}")
    rates = {f"detection-choice->{t}": h / cfg.trials for t, h in hits.items()}
    best, rate, baseline, threshold, fair = _judge(rates, cfg.trials, length)
    return Cell("tree", cfg.attack, cfg.n, length, best, rate, baseline, threshold, fair,
                runs, 0, cfg.trials, ids[:5])


def evaluate_cell(cfg: ExperimentConfig) -> Cell:
    if cfg.attack is None:
        raise ConfigError("a fairness cell needs an attack class")
    return _tree_cell(cfg) if cfg.topology == "tree" else _routed_cell(cfg)


def build_fairness_matrix(sweep: Sequence[ExperimentConfig] | None = None, seed: int = 0,
                          curve: bool = True) -> FairnessReport:
    sweep = list(sweep) if sweep is not None else default_sweep(seed)
    covered = {c.topology for c in sweep}
    missing = set(ARCHETYPES) - covered
    if missing:
        raise ConfigError(f"sweep does not cover {sorted(missing)}")
    cells = [evaluate_cell(cfg) for cfg in sweep]
    report = FairnessReport(cells, seed)
    if curve:
        report.tree_control_curve = [
            {"shots": 6, "key_bits": 2, "colluder_picks": c, "control_rate": tree_control_rate(6, 2, c)}
            for c in range(1, 5)
        ]
    return report


# --- emission --------------------------------------------------------------

CSV_COLUMNS = ["archetype", "N", "attack", "verdict", "detections", "trials"]


def render(report: FairnessReport, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for c in report.cells:
            writer.writerow([c.archetype, c.n, c.attack, c.verdict, c.detections, c.runs])
        return buf.getvalue()
    if fmt in ("markdown", "markdown-table"):
        yes_no = {True: "Yes", False: "No", None: "-"}
        lines = [
            "| Category | Fair against single attacks? | Fair against collusive attacks? | Comments |",
            "|---|---|---|---|",
        ]
        rows = report.rows()
        for archetype in ARCHETYPES:
            if archetype not in rows:
                continue
            row = rows[archetype]
            lines.append(
                f"| {CATEGORY_LABELS[archetype]} | {yes_no[row.get('fair_vs_single')]} | "
                f"{yes_no[row.get('fair_vs_collusive')]} | {COMMENTS[archetype]} |"
            )
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown report format {fmt!r}")


def emit_report(report: FairnessReport, fmt: str, path: str | Path | None = None) -> str:
    text = render(report, fmt)
    if path is not None:
        Path(path).write_text(text)
    return text


def load_report(path: str | Path) -> FairnessReport:
    return FairnessReport.from_dict(json.loads(Path(path).read_text()))
