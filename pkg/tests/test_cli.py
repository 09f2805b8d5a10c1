import json

import pytest

from qcsc.cli import exit_code_for, main
from qcsc.errors import (
    AllocationExpired,
    CouplingInfeasible,
    GraphInvalid,
    SingularMatrix,
    ParseError,
    RuntimeFailure,
    ValidationError,
)
from qcsc.scenarios import bundled_scenarios
from qcsc.tcg import PortKind, TcgNode, TensorComputeGraph, TensorEdge


def test_run_writes_report(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["run", "sqd_batch", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["scenario"] == "sqd_batch" and report["status"] == "ok"
    assert "sqd_batch makespan=" in capsys.readouterr().out


def test_run_writes_side_outputs(tmp_path):
    paths = {k: tmp_path / k for k in ("out", "trace", "metrics", "log")}
    argv = ["run", "qec_offline", "--out", str(paths["out"]), "--trace", str(paths["trace"])]
    argv += ["--metrics-out", str(paths["metrics"]), "--scheduler-log", str(paths["log"])]
    assert main(argv) == 0
    assert paths["metrics"].read_text().startswith("# TYPE")
    assert paths["trace"].read_text() and paths["log"].read_text()


def test_malformed_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": ')
    assert main(["run", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "ParseError" in err and "line 1" in err


def test_missing_file_exits_2(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.json")]) == 2
    assert "ParseError" in capsys.readouterr().err


def test_validate_closed_loop_on_loose(capsys):
    assert main(["validate", "closed_loop_sqd", "--topology", "loose"]) == 2
    captured = capsys.readouterr()
    assert "CouplingInfeasible" in captured.err and "status=invalid" in captured.out


def test_run_rejected_on_loose_exits_2(tmp_path, capsys):
    assert main(["run", "error_mitigation", "--topology", "loose", "--out", str(tmp_path / "r.json")]) == 2
    assert "ResidencyViolation" in capsys.readouterr().err
    assert not (tmp_path / "r.json").exists()


@pytest.mark.parametrize("name", ["sqd_batch", "qec_offline"])
def test_validate_clean(name, capsys):
    assert main(["validate", name, "--topology", "loose"]) == 0
    assert "diagnostics=0 status=ok" in capsys.readouterr().out


def test_validate_unknown_workload(tmp_path, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"name": "s", "seed": 0, "topology": "tight", "workloads": [{"id": "a", "workload": "teleport"}]}))
    assert main(["validate", str(path)]) == 2
    assert "UnknownWorkload" in capsys.readouterr().err


def test_validate_graph_file(tmp_path, capsys):
    real = PortKind.REAL_TENSOR
    path = tmp_path / "g.json"
    good = TensorComputeGraph([TcgNode.classical("a", "sum", {}, {"y": real})], [], name="g")
    path.write_text(json.dumps(good.to_dict()))
    assert main(["validate", str(path)]) == 0
    assert "g diagnostics=0 status=ok" in capsys.readouterr().out
    node = TcgNode.classical("a", "identity", {"x": real}, {"y": real})
    loop = TensorComputeGraph([node], [TensorEdge("a", "y", "a", "x", real, 8)], name="loop")
    path.write_text(json.dumps(loop.to_dict()))
    assert main(["validate", str(path)]) == 2
    assert "CycleDetected" in capsys.readouterr().err


def test_report_formats(tmp_path, capsys):
    out = tmp_path / "r.json"
    main(["run", "sqd_batch", "--out", str(out)])
    capsys.readouterr()
    assert main(["report", str(out), "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("job,workload,kind") and len(lines) == 1 + len(json.loads(out.read_text())["jobs"])
    assert main(["report", str(out)]) == 0
    assert json.loads(capsys.readouterr().out) == json.loads(out.read_text())


def test_report_rejects_non_report(tmp_path):
    path = tmp_path / "x.json"
    path.write_text("[1]")
    assert main(["report", str(path)]) == 2


def test_list(capsys):
    assert main(["list"]) == 0
    assert capsys.readouterr().out.split() == bundled_scenarios()


@pytest.mark.parametrize(
    "exc,code",
    [
        (ParseError("x"), 2),
        (ValidationError([]), 2),
        (GraphInvalid([]), 2),
        (CouplingInfeasible("x"), 3),
        (AllocationExpired("x"), 3),
        (RuntimeFailure("x"), 3),
        (SingularMatrix("x"), 3),
    ],
)
def test_exit_code_by_class(exc, code):
    assert exit_code_for(exc) == code


def test_reports_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["run", "closed_loop_sqd", "--out", str(a)])
    main(["run", "closed_loop_sqd", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_runtime_failure_exits_3(tmp_path, capsys):
    path = tmp_path / "s.json"
    doc = {"name": "short", "seed": 0, "topology": "tight", "horizon": "1us"}
    doc["workloads"] = [{"id": "sqd", "workload": "sqd", "params": {"model": {"sites": 4, "delta": 1.0, "k": 2}, "shots": 100, "m": 4}}]
    path.write_text(json.dumps(doc))
    assert main(["run", str(path), "--out", str(tmp_path / "r.json")]) == 3
    assert "incomplete" in capsys.readouterr().err
