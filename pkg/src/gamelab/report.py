"""Experiment report schema: versioned, deterministic, losslessly round-tripping.

Wall-clock timings are volatile and therefore serialised to a separate
sidecar (``timings.json``); ``report.json`` depends only on (flags, seed).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .errors import InvalidArgumentError

SCHEMA_VERSION = 1

__all__ = ["Check", "ExperimentReport", "MethodResult", "SCHEMA_VERSION"]


@dataclass
class MethodResult:
    method: str
    value: float
    uncertainty: float
    tolerance: float
    target: float = None
    passed: bool = None
    extra: dict = field(default_factory=dict)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentReport:
    scenario: str
    params: dict
    grids: dict
    seed: int
    methods: list = field(default_factory=list)     # [MethodResult]
    checks: list = field(default_factory=list)      # [Check]
    deltas: list = field(default_factory=list)      # [{a, b, delta, bound, passed}]
    wall_clock: dict = field(default_factory=dict)  # stage -> seconds (sidecar only)
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        ok = all(m.passed for m in self.methods if m.passed is not None)
        ok &= all(c.passed for c in self.checks)
        ok &= all(d.get("passed", True) for d in self.deltas)
        return bool(ok)

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "params": self.params,
            "grids": self.grids,
            "seed": self.seed,
            "methods": [asdict(m) for m in self.methods],
            "checks": [asdict(c) for c in self.checks],
            "deltas": self.deltas,
            "passed": self.passed,
        }
        return json.dumps(doc, sort_keys=True, indent=2)

    def timings_json(self) -> str:
        return json.dumps({"wall_clock": self.wall_clock}, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        doc = json.loads(text)
        allowed = {"schema_version", "scenario", "params", "grids", "seed",
                   "methods", "checks", "deltas", "passed"}
        unknown = set(doc) - allowed
        if unknown:
            raise InvalidArgumentError(f"unknown report fields: {sorted(unknown)}")
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise InvalidArgumentError(
                f"unsupported report schema {doc.get('schema_version')!r}")
        m_allowed = {"method", "value", "uncertainty", "tolerance", "target",
                     "passed", "extra"}
        methods = []
        for m in doc.get("methods", []):
            unknown = set(m) - m_allowed
            if unknown:
                raise InvalidArgumentError(f"unknown method fields: {sorted(unknown)}")
            methods.append(MethodResult(**m))
        checks = [Check(**c) for c in doc.get("checks", [])]
        return cls(scenario=doc["scenario"], params=doc["params"],
                   grids=doc["grids"], seed=doc["seed"], methods=methods,
                   checks=checks, deltas=doc.get("deltas", []))
