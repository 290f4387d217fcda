"""Scenario files: an INI document with ``[state]``, ``[steps]``, ``[analyses]``
and ``[output]`` sections, plus optional ``[hypothesis]`` and ``[tolerances]``.

Example::

    [state]
    shared = psi-minus

    [steps]
    alice-first = alice:measure-z, bob:flip
    bob-first = bob:flip, alice:measure-z

    [hypothesis]
    flip = phi-plus

    [analyses]
    run = theorem1, classify, optimize-not
    compare = alice-first, bob-first

    [output]
    report = report.json

Explicit matrices list rows separated by ``;`` or new lines, entries by
commas, each entry a Python complex literal (``0.5``, ``0.25-0.1j``).
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass

import numpy as np

from .channels import depolarizing
from .dynamics import EnsembleMap, PureFlip, Unitary, Cptp, bob_flip_hypothesis, Operation
from .qcore import (
    BELL_STATES,
    I2,
    KET_0,
    KET_1,
    PAULI_MEASUREMENTS,
    PAULIS,
    DensityMatrix,
    InvalidStateError,
    Ket,
    Party,
    ProjectiveMeasurement,
)

ANALYSES = ("theorem1", "classify", "optimize-not")
BUILTIN_STATES = ("psi-minus", "psi-plus", "phi-plus", "phi-minus", "product", "maximally-mixed")
TOLERANCE_KEYS = {"membership": 1e-9, "differ": 1e-9, "oracle-match": 1e-3}
OUTPUT_KEYS = {"report": "report.json", "plot": "phase_circles.tsv", "trace": "optimization_trace.tsv"}
SECTIONS = {
    "state": {"shared", "matrix"},
    "steps": None,  # free keys: one per order label
    "hypothesis": {"flip"},
    "analyses": {"run", "compare", "ensemble"},
    "tolerances": set(TOLERANCE_KEYS),
    "output": set(OUTPUT_KEYS),
}

_STEP_RE = re.compile(r"^(alice|bob|a|b)\s*:\s*(.+)$", re.IGNORECASE)
_OP_RE = re.compile(r"^([a-z-]+)(?:\(([^)]*)\))?$")


@dataclass
class ParseIssue:
    line: int | None
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}" if self.line else self.message


class ScenarioError(ValueError):
    def __init__(self, issues: list[ParseIssue]):
        self.issues = issues
        super().__init__("; ".join(str(i) for i in issues))


@dataclass(frozen=True)
class Scenario:
    shared: str = "psi-minus"  # builtin name, or "matrix"
    matrix: tuple | None = None  # rows of complex entries when shared == "matrix"
    orders: tuple = ()  # ((label, ((party, op-spec), ...)), ...)
    hypothesis: str | None = None
    analyses: tuple = ("theorem1",)
    compare: tuple | None = None
    ensemble: str = "proper"
    tolerances: tuple = ()  # overrides as ((key, value), ...)
    outputs: tuple = tuple(OUTPUT_KEYS.items())

    def tolerance(self, key: str) -> float:
        return dict(self.tolerances).get(key, TOLERANCE_KEYS[key])

    def output(self, key: str) -> str:
        return dict(self.outputs)[key]

    def shared_state(self) -> DensityMatrix:
        if self.shared == "matrix":
            return DensityMatrix(np.array(self.matrix, dtype=complex))
        return builtin_state(self.shared)

    def with_tolerances(self, overrides: dict) -> "Scenario":
        merged = dict(self.tolerances)
        merged.update(overrides)
        return _replace(self, tolerances=tuple(sorted(merged.items())))


def _replace(s: Scenario, **kw) -> Scenario:
    from dataclasses import replace

    return replace(s, **kw)


def builtin_state(name: str) -> DensityMatrix:
    if name in BELL_STATES:
        return BELL_STATES[name].dm()
    if name == "product":
        return (KET_0 @ KET_1).dm()
    if name == "maximally-mixed":
        return DensityMatrix(np.eye(4) / 4)
    raise KeyError(name)


def g_rule(psi: Ket) -> Ket:
    """Nonlinear toy rule: keeps ``|0>`` and ``|1>``, sends every other state to ``|0>``."""
    for basis in (KET_0, KET_1):
        if abs(abs(psi.inner(basis)) - 1) < 1e-12:
            return basis
    return KET_0


def build_operation(spec: str, hypothesis: DensityMatrix | None = None,
                    shared: DensityMatrix | None = None) -> Operation:
    """Turn an operation token (``measure-z``, ``depolarize(0.3)``, ``flip``…) into an object."""
    m = _OP_RE.match(spec.strip().lower())
    if not m:
        raise ValueError(f"malformed operation {spec!r}")
    name, arg = m.group(1), m.group(2)
    if name == "identity":
        return Unitary(I2, "identity")
    if name.startswith("measure-") and name[8:] in PAULI_MEASUREMENTS and arg is None:
        return PAULI_MEASUREMENTS[name[8:]]
    if name == "measure-n":
        vals = [float(v) for v in (arg or "").split()]
        if len(vals) != 3 or np.linalg.norm(vals) == 0:
            raise ValueError("measure-n needs three direction components, e.g. measure-n(0 0.6 0.8)")
        return ProjectiveMeasurement.along(vals, name=f"n({' '.join(f'{v:g}' for v in vals)})")
    if name.startswith("unitary-") and arg is None:
        key = name[8:]
        if key in PAULIS:
            return Unitary(PAULIS[key], name)
        if key == "h":
            return Unitary(np.array([[1, 1], [1, -1]]) / np.sqrt(2), name)
    if name == "depolarize":
        try:
            p = float(arg)
        except (TypeError, ValueError):
            raise ValueError("depolarize needs a probability, e.g. depolarize(0.3)") from None
        return Cptp(depolarizing(p), f"depolarize({p:g})")
    if name == "flip" and arg is None:
        hyp = bob_flip_hypothesis(shared, hypothesis) if hypothesis is not None else None
        return PureFlip(hyp)
    if name == "g-map" and arg is None:
        hyp = bob_flip_hypothesis(shared, hypothesis) if hypothesis is not None else None
        return EnsembleMap(g_rule, "g-map", hyp)
    raise ValueError(f"unknown operation {spec!r}")


# --- parsing -----------------------------------------------------------------

def _key_lines(text: str) -> dict:
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = re.sub(r"\s#.*$", "", raw).strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip().lower()
            lines.setdefault((section, None), no)
            continue
        if raw[:1].isspace():
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            lines.setdefault((section, m.group(1).strip().lower()), no)
    return lines


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.replace("\n", ",").split(",") if v.strip()]


def parse_matrix(value: str) -> tuple:
    rows = [r for r in re.split(r"[;\n]", value) if r.strip()]
    out = []
    for r in rows:
        out.append(tuple(complex(e.strip().replace(" ", "")) for e in r.split(",") if e.strip()))
    return tuple(out)


def parse_scenario(text: str) -> Scenario:
    """Validate a scenario document; raises :class:`ScenarioError` listing every problem."""
    issues: list[ParseIssue] = []
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__",
                                   inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ScenarioError([ParseIssue(line, str(exc).splitlines()[0])]) from None
    where = _key_lines(text)

    def loc(section, key=None):
        return where.get((section, key), where.get((section, None)))

    for section in cp.sections():
        if section not in SECTIONS:
            issues.append(ParseIssue(loc(section), f"unknown section [{section}]"))
            continue
        allowed = SECTIONS[section]
        if allowed is not None:
            for key in cp[section]:
                if key not in allowed:
                    issues.append(ParseIssue(loc(section, key), f"unknown key {key!r} in [{section}]"))

    kw: dict = {}
    if cp.has_section("state"):
        st = cp["state"]
        if "matrix" in st:
            try:
                mat = parse_matrix(st["matrix"])
                DensityMatrix(np.array(mat, dtype=complex))
                kw.update(shared="matrix", matrix=mat)
            except (ValueError, InvalidStateError) as exc:
                issues.append(ParseIssue(loc("state", "matrix"), f"invalid matrix: {exc}"))
            if "shared" in st and st["shared"].strip() != "matrix":
                issues.append(ParseIssue(loc("state", "shared"), "give either shared or matrix, not both"))
        elif "shared" in st:
            name = st["shared"].strip().lower()
            if name not in BUILTIN_STATES:
                issues.append(ParseIssue(loc("state", "shared"), f"unknown builtin state {name!r}"))
            else:
                kw["shared"] = name
    else:
        issues.append(ParseIssue(None, "missing [state] section"))

    hypothesis = None
    if cp.has_section("hypothesis") and "flip" in cp["hypothesis"]:
        raw = cp["hypothesis"]["flip"].strip()
        if raw.lower() in BUILTIN_STATES:
            hypothesis = raw.lower()
        else:
            try:
                DensityMatrix(np.array(parse_matrix(raw), dtype=complex))
                hypothesis = raw
            except (ValueError, InvalidStateError) as exc:
                issues.append(ParseIssue(loc("hypothesis", "flip"), f"invalid hypothesis state: {exc}"))
        kw["hypothesis"] = hypothesis

    orders = []
    if cp.has_section("steps"):
        for label, value in cp["steps"].items():
            steps = []
            for token in _split_list(value):
                m = _STEP_RE.match(token)
                if not m:
                    issues.append(ParseIssue(loc("steps", label), f"step {token!r} must look like party:operation"))
                    continue
                party = Party.parse(m.group(1)).value
                op = m.group(2).strip().lower()
                try:
                    build_operation(op, None, None)
                except ValueError as exc:
                    issues.append(ParseIssue(loc("steps", label), str(exc)))
                    continue
                steps.append((party, op))
            orders.append((label, tuple(steps)))
    kw["orders"] = tuple(orders)

    if cp.has_section("analyses"):
        an = cp["analyses"]
        if "run" in an:
            names = tuple(n.lower() for n in _split_list(an["run"]))
            for n in names:
                if n not in ANALYSES:
                    issues.append(ParseIssue(loc("analyses", "run"), f"unknown analysis {n!r}"))
            kw["analyses"] = names
        if "compare" in an:
            pair = tuple(_split_list(an["compare"]))
            labels = [o[0] for o in orders]
            if len(pair) != 2 or any(p not in labels for p in pair):
                issues.append(ParseIssue(loc("analyses", "compare"), "compare must name two step orders"))
            kw["compare"] = pair
        if "ensemble" in an:
            ens = an["ensemble"].strip().lower()
            if ens not in ("proper", "improper"):
                issues.append(ParseIssue(loc("analyses", "ensemble"), "ensemble must be proper or improper"))
            kw["ensemble"] = ens
    analyses = kw.get("analyses", Scenario.analyses)
    if "classify" in analyses and "compare" not in kw and len(orders) < 2:
        issues.append(ParseIssue(loc("analyses", "run"), "classify needs at least two step orders"))

    if cp.has_section("tolerances"):
        tols = []
        for key, value in cp["tolerances"].items():
            if key not in TOLERANCE_KEYS:
                continue
            try:
                v = float(value)
                if not (v > 0 and np.isfinite(v)):
                    raise ValueError
                tols.append((key, v))
            except ValueError:
                issues.append(ParseIssue(loc("tolerances", key), f"invalid tolerance {value!r} for {key}"))
        kw["tolerances"] = tuple(sorted(tols))

    outputs = dict(OUTPUT_KEYS)
    if cp.has_section("output"):
        for key, value in cp["output"].items():
            if key in OUTPUT_KEYS:
                outputs[key] = value.strip()
    kw["outputs"] = tuple(outputs.items())

    if issues:
        raise ScenarioError(issues)
    return Scenario(**kw)


def _fmt_complex(z: complex) -> str:
    return repr(complex(z)).strip("()")


def _fmt_matrix(rows) -> str:
    return "; ".join(", ".join(_fmt_complex(v) for v in row) for row in rows)


def serialize_scenario(s: Scenario) -> str:
    """INI text that parses back to ``s``."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    cp["state"] = {"matrix": _fmt_matrix(s.matrix)} if s.shared == "matrix" else {"shared": s.shared}
    cp["steps"] = {label: ", ".join(f"{p}:{op}" for p, op in steps) for label, steps in s.orders}
    if s.hypothesis is not None:
        cp["hypothesis"] = {"flip": s.hypothesis}
    analyses = {"run": ", ".join(s.analyses), "ensemble": s.ensemble}
    if s.compare is not None:
        analyses["compare"] = ", ".join(s.compare)
    cp["analyses"] = analyses
    if s.tolerances:
        cp["tolerances"] = {k: repr(v) for k, v in s.tolerances}
    cp["output"] = dict(s.outputs)
    import io

    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def hypothesis_state(s: Scenario) -> DensityMatrix | None:
    if s.hypothesis is None:
        return None
    if s.hypothesis in BUILTIN_STATES:
        return builtin_state(s.hypothesis)
    return DensityMatrix(np.array(parse_matrix(s.hypothesis), dtype=complex))
