# tests/test_main.py

import pytest
from fastapi.testclient import TestClient

from src import __version__
from src.main import app
from src.models.report_models import BoundSuiteReport, ExperimentReport, ReportRow


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_status(client):
    res = client.get("/status")
    assert res.status_code == 200
    assert res.json() == {"status": "ok", "version": __version__}


def test_invalid_body(client):
    assert client.post("/experiments/sweep-k", json={"h": -1.0}).status_code == 422


def test_standoff_violation_is_422(client):
    body = {
        "name": "demasiado_grande", "physics": "scalar", "h": 0.1, "k_ladder": [2.0],
        "domain": {"shape": "ball", "radius": 0.6},
        "sources": [{"field": "f0", "kind": "polynomial", "center": [0.0, 0.0, 0.0], "width": 0.6,
                     "amplitude": [1.0]}],
    }
    res = client.post("/experiments/sweep-k", json=body)
    assert res.status_code == 422
    assert "separación" in res.json()["detail"]


def test_download_csv(client):
    report = ExperimentReport(name="descarga", rows=[ReportRow(K=2.0, err_l2_f0=0.3)])
    res = client.post("/download-report", json={"sweep": report.model_dump(mode="json"), "file_format": "csv"})
    assert res.status_code == 200
    assert res.headers["content-type"].startswith("text/csv")
    assert "attachment; filename=descarga_" in res.headers["content-disposition"]
    assert res.text.startswith("K,")


def test_download_svg_of_bounds_report(client):
    body = {"bounds": BoundSuiteReport(name="cotas").model_dump(mode="json"), "file_format": "svg"}
    assert client.post("/download-report", json=body).status_code == 400


def test_download_without_report(client):
    assert client.post("/download-report", json={"file_format": "json"}).status_code == 400
