# tests/test_report_writer.py

import json

import pytest
from lxml import etree

from src.core.errors import StorageError
from src.models.report_models import (
    BOUND_COLUMNS, REPORT_COLUMNS, BoundCheckRow, BoundSuiteReport, CheckResult, ExperimentReport, ReportRow,
)
from src.modules.report_writer import (
    bounds_to_csv, emit_report, parse_csv, render_svg, report_filename, report_to_csv,
)


@pytest.fixture
def report():
    rows = [
        ReportRow(K=2.0, epsilon=1e-3, E=6.9, err_l2_f0=0.5, err_hm1_f1=0.1, ceiling=0.8, wall_s=1.25),
        ReportRow(K=4.0, epsilon=1e-3, E=6.9, k_trunc=5.5, err_l2_f0=0.25, err_hm1_f1=0.05, ceiling=0.6),
        ReportRow(K=8.0, status="failed", error="sin memoria"),
    ]
    return ExperimentReport(name="prueba", rows=rows)


@pytest.fixture
def bounds_report():
    return BoundSuiteReport(
        name="cotas",
        rows=[BoundCheckRow(functional="I0", k_re=1.0, k_im=0.5, value=0.1, bound=1.0, ratio=0.1, passed=True),
              BoundCheckRow(functional="I1_cont", k_re=3.0, value=2.0, bound=1.0, ratio=2.0, passed=False)],
        checks=[CheckResult(name="parseval", value=1.0, threshold=1e-6, passed=True)],
    )


def test_report_csv(report):
    text = report_to_csv(report)
    lines = text.splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert len(lines) == 4
    assert lines[3].startswith("8.0,,,")
    parsed = parse_csv(text)
    assert parsed[0]["K"] == 2.0 and parsed[0]["wall_s"] == 1.25
    assert parsed[1]["k_trunc"] == 5.5 and parsed[0]["k_trunc"] is None
    assert parsed[2]["err_l2_f0"] is None


def test_bounds_csv(bounds_report):
    lines = bounds_to_csv(bounds_report).splitlines()
    assert lines[0] == ",".join(BOUND_COLUMNS)
    assert lines[1].endswith(",true")
    assert lines[2].endswith(",false")
    assert not bounds_report.passed


def test_svg_is_valid_and_deterministic(report):
    first, second = render_svg(report), render_svg(report)
    assert first == second
    root = etree.fromstring(first)
    assert root.tag.endswith("svg")


def test_svg_of_empty_report():
    etree.fromstring(render_svg(ExperimentReport(name="vacio")))


def test_emit_report(tmp_path, report, bounds_report):
    written = emit_report(report, tmp_path)
    assert sorted(p.suffix for p in written) == [".csv", ".json", ".svg"]
    data = json.loads((tmp_path / "prueba.json").read_text(encoding="utf-8"))
    assert ExperimentReport.model_validate(data).rows[2].status == "failed"
    written = emit_report(bounds_report, tmp_path, stem="cotas_bounds")
    assert sorted(p.name for p in written) == ["cotas_bounds.csv", "cotas_bounds.json"]


def test_emit_report_errors(tmp_path, report):
    blocker = tmp_path / "fichero"
    blocker.write_text("x")
    with pytest.raises(StorageError):
        emit_report(report, blocker)
    with pytest.raises(StorageError):
        emit_report(report, tmp_path, formats=("pdf",))


def test_report_filename():
    report = ExperimentReport(name="Bola elástica: K/ε", physics="elastic", config_hash="0123456789abcdef")
    assert report_filename(report, "csv") == "Bola_elastica_K_elastic_01234567.csv"
    assert report_filename(report, "csv") == report_filename(report, "csv")
    assert report_filename(BoundSuiteReport(name="!!!"), "json") == "informe_scalar.json"
