import csv
import io
import json

import pytest

from mqka.analysis import (
    CSV_COLUMNS,
    ExperimentConfig,
    build_fairness_matrix,
    default_sweep,
    emit_report,
    evaluate_cell,
    load_report,
    render,
)
from mqka.errors import ConfigError


@pytest.fixture(scope="module")
def report():
    return build_fairness_matrix(default_sweep(seed=3, trials=32), seed=3, curve=False)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(topology="star")
    with pytest.raises(ConfigError):
        ExperimentConfig(n=2)
    with pytest.raises(ConfigError):
        ExperimentConfig(n=4, colluders=(0, 4))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"n": 4, "bogus": 1})


def test_config_load(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"topology": "tree", "n": 3, "colluders": [0, 2]}))
    cfg = ExperimentConfig.load(path)
    assert cfg.topology == "tree" and cfg.colluders == (0, 2)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(path)
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")


def test_config_rng_is_salted():
    cfg = ExperimentConfig(seed=7)
    assert cfg.rng("a").random() == cfg.rng("a").random()
    assert cfg.rng("a").random() != cfg.rng("b").random()


def test_cell_needs_attack():
    with pytest.raises(ConfigError):
        evaluate_cell(ExperimentConfig())


def test_matrix_needs_every_archetype():
    with pytest.raises(ConfigError):
        build_fairness_matrix(default_sweep()[:2], curve=False)


def test_csv_schema(report):
    rows = list(csv.reader(io.StringIO(render(report, "csv"))))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 1 + len(report.cells)
    for row in rows[1:]:
        assert row[3] in ("fair", "unfair")
        assert int(row[1]) >= 3 and int(row[4]) >= 0 and int(row[5]) > 0


def test_json_round_trip(report, tmp_path):
    path = tmp_path / "report.json"
    emit_report(report, "json", path)
    again = load_report(path)
    assert again.to_dict() == report.to_dict()
    assert render(again, "json") == path.read_text()


def test_markdown_layout(report):
    lines = render(report, "markdown").splitlines()
    assert lines[0].startswith("| Category |")
    assert len(lines) == 2 + 4


def test_unknown_format(report):
    with pytest.raises(ConfigError):
        render(report, "yaml")


def test_verdict_pattern(report):
    rows = report.rows()
    assert rows["complete"]["fair_vs_single"] and rows["complete"]["fair_vs_collusive"]
    assert rows["circle"]["fair_vs_single"] and not rows["circle"]["fair_vs_collusive"]
    assert rows["half-circle"]["fair_vs_single"] and not rows["half-circle"]["fair_vs_collusive"]
    assert not rows["tree"]["fair_vs_single"] and not rows["tree"]["fair_vs_collusive"]


def test_cells_carry_threshold(report):
    for cell in report.cells:
        assert cell.baseline == pytest.approx(2 ** -cell.key_len)
        assert cell.threshold > cell.baseline
        assert cell.fair == (cell.best_rate <= cell.threshold)
