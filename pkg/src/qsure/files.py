"""Model files and reports.

A model file is JSON::

    {
      "outcomes": ["up", "down"],
      "filtration": [[["up", "down"]], [["up"], ["down"]]],
      "prices": [[[1, 1]], [[2, "1/2"]]],
      "priors": [{"up": 1, "down": 0}, {"up": 0, "down": 1}],
      "payoffs": {"call": {"up": 1, "down": 0}}
    }

``prices[t][asset]`` is either a list over outcomes or a ``label -> value``
map; priors and payoffs are ``label -> value`` maps (missing labels are 0 in
a prior, an error in a payoff). Numbers may be JSON numbers, decimal strings
or exact fractions ``"p/q"``; files are always parsed exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from pathlib import Path

from .core import Prior, PriorFamily, SampleSpace
from .errors import ValidationError
from .market import Filtration, MarketModel, validate_model
from .numeric import EXACT, format_number, parse_number

FIXTURES = Path(__file__).parent / "fixtures"


@dataclass(frozen=True)
class ModelFile:
    space: SampleSpace
    filtration: Filtration
    model: MarketModel
    family: PriorFamily
    payoffs: dict

    def payoff(self, name):
        try:
            return self.payoffs[name]
        except KeyError:
            raise ValidationError(f"unknown payoff {name!r}; available: {sorted(self.payoffs)}") from None


def resolve(path):
    """A path on disk, or the name of a bundled fixture (``binomial``)."""
    p = Path(path)
    if p.exists():
        return p
    for candidate in (FIXTURES / f"{path}.json", FIXTURES / path):
        if candidate.exists():
            return candidate
    raise ValidationError(f"model file {path!r} not found")


def load(path):
    p = resolve(path)
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_model(data, source=str(p))


def parse_model(data, source="<model>"):
    issues = []

    def fail(where, msg):
        issues.append(f"{where}: {msg}")

    def num(value, where):
        try:
            return parse_number(value, EXACT)
        except ValidationError as exc:
            fail(where, str(exc))
            return Fraction(0)

    if not isinstance(data, dict):
        raise ValidationError(f"{source}: top level must be an object")
    for key in ("outcomes", "filtration", "prices", "priors"):
        if key not in data:
            fail(key, "missing required field")
    unknown = set(data) - {"outcomes", "filtration", "prices", "priors", "payoffs"}
    for key in sorted(unknown):
        fail(key, "unknown field")
    if issues:
        raise ValidationError(f"{source}: schema violation", issues)

    try:
        space = SampleSpace(tuple(data["outcomes"]))
    except ValidationError as exc:
        raise ValidationError(f"{source}: outcomes: {exc}") from exc
    labels = space.outcomes
    n = len(labels)

    def label_index(label, where):
        if label not in labels:
            fail(where, f"unknown outcome label {label!r}")
            return None
        return labels.index(label)

    parts = []
    for t, part in enumerate(data["filtration"]):
        blocks = []
        for b, block in enumerate(part):
            idx = [label_index(lbl, f"filtration[{t}][{b}]") for lbl in block]
            blocks.append(tuple(i for i in idx if i is not None))
        parts.append(tuple(blocks))

    def row_of(raw, where, fill=None):
        if isinstance(raw, dict):
            out = [fill] * n
            for lbl, v in raw.items():
                i = label_index(lbl, where)
                if i is not None:
                    out[i] = num(v, f"{where}[{lbl!r}]")
            for i, v in enumerate(out):
                if v is None:
                    fail(where, f"missing value for outcome {labels[i]!r}")
                    out[i] = Fraction(0)
            return out
        if isinstance(raw, list):
            if len(raw) != n:
                fail(where, f"expected {n} values, got {len(raw)}")
                return [Fraction(0)] * n
            return [num(v, f"{where}[{i}]") for i, v in enumerate(raw)]
        fail(where, "expected a list or a label map")
        return [Fraction(0)] * n

    prices = []
    for t, S_t in enumerate(data["prices"]):
        if not isinstance(S_t, list) or not S_t:
            fail(f"prices[{t}]", "expected a nonempty list of assets")
            continue
        prices.append([row_of(row, f"prices[{t}][{j}]") for j, row in enumerate(S_t)])

    priors = []
    for k, raw in enumerate(data["priors"]):
        where = f"priors[{k}]"
        if not isinstance(raw, (dict, list)):
            fail(where, "expected a label map")
            continue
        w = row_of(raw, where, fill=Fraction(0))
        if any(x < 0 for x in w):
            fail(where, "negative weight")
        elif sum(w) != 1:
            fail(where, f"weights sum to {format_number(sum(w))}, not 1")
        else:
            priors.append(Prior(tuple(w)))
    if not data["priors"]:
        fail("priors", "at least one prior is required")

    payoffs = {}
    for name, raw in (data.get("payoffs") or {}).items():
        payoffs[name] = tuple(row_of(raw, f"payoffs[{name!r}]"))

    if issues:
        raise ValidationError(f"{source}: {len(issues)} problem(s)", issues)

    filtration = Filtration(tuple(parts))
    try:
        model = MarketModel(space, filtration, prices)
    except ValidationError as exc:
        raise ValidationError(f"{source}: {exc}") from exc
    verdict = validate_model(model)
    if not verdict.valid:
        raise ValidationError(f"{source}: invalid market model", [i["reason"] for i in verdict.issues])
    family = PriorFamily(space, tuple(priors))
    return ModelFile(space, filtration, model, family, payoffs)


def _jsonable_number(x):
    return format_number(Fraction(x)) if not (isinstance(x, float) and math.isinf(x)) else format_number(x)


def model_to_dict(mf):
    labels = mf.space.outcomes
    return {
        "outcomes": list(labels),
        "filtration": [[[labels[i] for i in block] for block in part] for part in mf.filtration.partitions],
        "prices": [[[_jsonable_number(x) for x in row] for row in S_t] for S_t in mf.model.prices],
        "priors": [{lbl: _jsonable_number(w) for lbl, w in zip(labels, p.weights)} for p in mf.family.priors],
        "payoffs": {name: {lbl: _jsonable_number(v) for lbl, v in zip(labels, vals)} for name, vals in mf.payoffs.items()},
    }


def dump_model(mf):
    """Serialize a model file; ``parse_model(json.loads(dump_model(m)))``
    reproduces ``m``. Numbers are written as exact fraction strings."""
    return json.dumps(model_to_dict(mf), indent=2) + "\n"


# -- reports -----------------------------------------------------------------


@dataclass
class Report:
    command: str
    inputs: dict
    mode: str
    verdicts: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    timing: dict = None
    table: tuple = None  # (header, rows) for CSV output

    def as_dict(self):
        return {
            "command": self.command,
            "inputs": self.inputs,
            "mode": self.mode,
            "verdicts": self.verdicts,
            "results": self.results,
            "certificates": self.certificates,
            "timing": self.timing,
        }


def render(value):
    """Recursively convert report content into JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): render(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [render(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return [render(v) for v in sorted(value, key=str)]
    if isinstance(value, bool) or value is None or isinstance(value, str) or type(value) is int:
        return value
    if isinstance(value, Number):
        return format_number(value)
    return str(value)


def digest(*parts):
    h = hashlib.sha256()
    for part in parts:
        h.update(json.dumps(part, sort_keys=True, default=str).encode())
        h.update(b"\0")
    return h.hexdigest()


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, out)
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        out.append((prefix, value))
    elif isinstance(value, str) and _numeric_string(value):
        out.append((prefix, value))


def _numeric_string(s):
    try:
        Fraction(s)
        return True
    except (ValueError, ZeroDivisionError):
        return s in ("inf", "-inf")


def emit(report, fmt="json"):
    """Serialize a report: JSON with stable field order, or CSV of its
    numeric results (one row per table entry when the report has a
    table)."""
    if fmt == "json":
        return (json.dumps(render(report.as_dict()), indent=2) + "\n").encode()
    if fmt != "csv":
        raise ValidationError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if report.table is not None:
        header, rows = report.table
        writer.writerow(header)
        for row in rows:
            writer.writerow(render(list(row)))
    else:
        writer.writerow(["key", "value"])
        flat = []
        _flatten("", render(report.results), flat)
        for key, value in flat:
            writer.writerow([key, value])
    return buf.getvalue().encode()
