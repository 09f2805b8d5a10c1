"""Scenario files: lookup, schema validation and parsing into typed records."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from qcsc.errors import ParseError, ValidationError
from qcsc.scheduler.core import SchedulerPolicy
from qcsc.tcg.graph import Diagnostic
from qcsc.units import parse_duration

_PKG = resources.files("qcsc.scenarios")


def schema() -> dict:
    return json.loads(_PKG.joinpath("schema.json").read_text())


def bundled_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in _PKG.joinpath("bundled").iterdir() if p.name.endswith(".json"))


def bundled_topologies() -> list[str]:
    return sorted(p.name[:-5] for p in _PKG.joinpath("topologies").iterdir() if p.name.endswith(".json"))


def read_json(path: Path | Any, what: str) -> Any:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {what} {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what} {path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def resolve_scenario(ref: str | Path) -> Path | Any:
    """A file path, or the name of a bundled scenario (with or without ``.json``)."""
    path = Path(ref)
    if path.exists():
        return path
    name = path.name[:-5] if path.name.endswith(".json") else path.name
    if str(path.parent) in ("", ".") and name in bundled_scenarios():
        return _PKG.joinpath("bundled", f"{name}.json")
    raise ParseError(f"no scenario file {ref!r}; bundled scenarios: {', '.join(bundled_scenarios())}")


def load_topology(ref: str | Mapping[str, Any]) -> tuple[str, dict]:
    """(name, config) for a bundled topology name, a JSON file path, or an inline config."""
    if isinstance(ref, Mapping):
        return str(ref.get("name", "inline")), dict(ref)
    if ref in bundled_topologies():
        return ref, read_json(_PKG.joinpath("topologies", f"{ref}.json"), "topology")
    path = Path(ref)
    if path.exists():
        doc = read_json(path, "topology")
        return str(doc.get("name", path.stem)), doc
    raise ParseError(f"unknown topology {ref!r}; bundled topologies: {', '.join(bundled_topologies())}")


@dataclass(frozen=True)
class DeviceSettings:
    readout_error: float | tuple[float, ...] = 0.0
    gate_error: float = 0.0
    t1_proxy: int | None = None
    t_shot_base: int | None = None
    t_gate: int | None = None
    drift_magnitude: float = 0.0
    drift_interval: int = 0

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DeviceSettings":
        ro = d.get("readout_error", 0.0)
        dur = {k: parse_duration(d[k]) for k in ("t1_proxy", "t_shot_base", "t_gate", "drift_interval") if k in d}
        return cls(
            tuple(float(x) for x in ro) if isinstance(ro, list) else float(ro),
            float(d.get("gate_error", 0.0)),
            dur.get("t1_proxy"),
            dur.get("t_shot_base"),
            dur.get("t_gate"),
            float(d.get("drift_magnitude", 0.0)),
            dur.get("drift_interval", 0),
        )


@dataclass(frozen=True)
class WorkloadEntry:
    id: str
    workload: str
    mode: str | None
    embedding: str | None
    submit_at: int
    params: Mapping[str, Any]
    job: Mapping[str, Any]


@dataclass
class Scenario:
    name: str
    seed: int
    topology_name: str
    topology: dict
    workloads: list[WorkloadEntry]
    devices: dict[str, DeviceSettings] = field(default_factory=dict)
    policy: SchedulerPolicy = SchedulerPolicy()
    horizon: int | None = None
    description: str = ""
    outputs: dict[str, str] = field(default_factory=dict)

    def device(self, qpu_id: str) -> DeviceSettings:
        return self.devices.get(qpu_id) or self.devices.get("default") or DeviceSettings()


def schema_diagnostics(doc: Any) -> list[Diagnostic]:
    validator = jsonschema.Draft202012Validator(schema())
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        out.append(Diagnostic("SchemaError", f"{where}: {err.message}"))
    return out


def parse_scenario(doc: Any, seed: int | None = None, topology: str | Mapping[str, Any] | None = None) -> Scenario:
    """Validate ``doc`` against the schema and build a :class:`Scenario`.

    ``seed`` and ``topology`` override the file's values.
    """
    diags = schema_diagnostics(doc)
    if diags:
        raise ValidationError(diags)
    topo_name, topo = load_topology(topology if topology is not None else doc["topology"])
    policy_doc = doc.get("scheduler", {})
    policy = SchedulerPolicy(
        kill_factor=float(policy_doc.get("kill_factor", 2.0)),
        backfill=bool(policy_doc.get("backfill", True)),
        preemption=bool(policy_doc.get("preemption", False)),
        node_order=policy_doc.get("node_order", "latency"),
    )
    entries = [
        WorkloadEntry(
            w["id"],
            w["workload"],
            w.get("mode"),
            w.get("embedding"),
            parse_duration(w.get("submit_at", 0)),
            dict(w.get("params", {})),
            dict(w.get("job", {})),
        )
        for w in doc["workloads"]
    ]
    ids = [e.id for e in entries]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ValidationError([Diagnostic("DuplicateWorkload", f"workload id {d!r} used more than once") for d in dupes])
    return Scenario(
        name=doc["name"],
        seed=int(doc["seed"] if seed is None else seed),
        topology_name=topo_name,
        topology=topo,
        workloads=entries,
        devices={k: DeviceSettings.from_dict(v) for k, v in doc.get("devices", {}).items()},
        policy=policy,
        horizon=parse_duration(doc["horizon"]) if "horizon" in doc else None,
        description=doc.get("description", ""),
        outputs=dict(doc.get("outputs", {})),
    )


def load_scenario(ref: str | Path, seed: int | None = None, topology: str | Mapping[str, Any] | None = None) -> Scenario:
    return parse_scenario(read_json(resolve_scenario(ref), "scenario"), seed=seed, topology=topology)
