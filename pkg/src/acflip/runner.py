"""Execute scenarios and write reports, plot tables and optimization traces."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import TimeOrderedExperiment, UndefinedActionError, run
from .qcore import trace_distance
from .gptclass import Level, classify, signaling_success_probability
from .scenario import Scenario, build_operation, hypothesis_state, serialize_scenario
from .theorem1 import framed, pauli_families, verify_theorem1
from .unotopt import OptimizationResult, brute_force_not_oracle, optimize_universal_not, trace_rows

PLOT_HEADER = ("kind", "family", "label", "phase", "coherence_re", "coherence_im")
PLOT_PHASES = 360


def _clean(obj):
    """Recursively convert numpy scalars/arrays into JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _matrix_rows(m) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m)]


def experiments(s: Scenario) -> dict[str, TimeOrderedExperiment]:
    shared = s.shared_state()
    hyp = hypothesis_state(s)
    out = {}
    for label, steps in s.orders:
        ops = tuple((party, build_operation(op, hyp, shared)) for party, op in steps)
        out[label] = TimeOrderedExperiment(shared, ops, label, s.ensemble)
    return out


def _run_orders(s: Scenario) -> tuple[dict, dict]:
    finals, section = {}, {}
    for label, exp in experiments(s).items():
        try:
            finals[label] = run(exp)
            section[label] = {"status": "ok", "final_state": _matrix_rows(finals[label].entries)}
        except UndefinedActionError as exc:
            section[label] = {"status": "undefined", "error": str(exc)}
    return finals, section


def _theorem1(s: Scenario) -> dict:
    cert = verify_theorem1(tol=s.tolerance("membership"))
    return {"status": "ok" if cert.passed else "failed", "certificate": cert.to_dict()}


def _classify(s: Scenario, finals: dict, order_info: dict) -> dict:
    pair = s.compare or tuple(label for label, _ in s.orders[:2])
    missing = [p for p in pair if p not in finals]
    if missing:
        return {"status": "failed", "orders": list(pair),
                "error": "; ".join(f"{p}: {order_info[p].get('error', 'not run')}" for p in missing)}
    a, b = (finals[p] for p in pair)
    verdict = classify(a, b, tol=s.tolerance("differ"))
    ok = verdict.check(a, b)
    ev = verdict.evidence
    return {
        "status": "ok" if ok else "failed",
        "orders": list(pair),
        "level": verdict.level.value,
        "relative_to_settings": verdict.relative_to_settings,
        "evidence": None if ev is None else {
            "kind": ev.kind, "setting": list(ev.setting), "first": list(ev.first),
            "second": list(ev.second), "difference": ev.difference,
        },
        "order_swap_residual": trace_distance(a, b),
        "signaling_success_probability": signaling_success_probability(verdict)
        if verdict.level is Level.STRONG else None,
        "notes": list(verdict.notes),
    }


def _optimize(s: Scenario, seed: int) -> tuple[dict, list]:
    res = optimize_universal_not(seed=seed)
    oracle = brute_force_not_oracle(seed=seed + 1)
    match = abs(res.worst_case - oracle) <= s.tolerance("oracle-match")
    gap = 1.0 - res.worst_case
    ok = match and gap >= 0.3
    section = {
        "status": "ok" if ok else "failed",
        "source": res.source,
        "worst_case_fidelity": res.worst_case,
        "ascent_worst_case": res.ascent_worst_case,
        "covariant_line_worst_case": res.line_worst_case,
        "score": {"average_fidelity": res.score.average_fidelity,
                  "worst_case_fidelity": res.score.worst_case_fidelity},
        "oracle_worst_case": oracle,
        "oracle_match": match,
        "gap_to_perfect": gap,
        "converged": res.converged,
        "channel_choi": _matrix_rows(res.channel.entries),
    }
    return section, trace_rows(res)


def run_scenario(s: Scenario, seed: int = 0) -> tuple[dict, list | None]:
    """Run every requested analysis; failures are recorded and the rest continue.

    Returns the report and the optimization trace rows (``None`` when not requested).
    """
    report = {
        "tool": "acflip",
        "version": __version__,
        "seed": seed,
        "scenario": serialize_scenario(s),
        "analyses": {},
    }
    finals, order_info = _run_orders(s)
    report["orders"] = order_info
    trace = None
    for name in s.analyses:
        try:
            if name == "theorem1":
                report["analyses"][name] = _theorem1(s)
            elif name == "classify":
                report["analyses"][name] = _classify(s, finals, order_info)
            elif name == "optimize-not":
                report["analyses"][name], trace = _optimize(s, seed)
        except Exception as exc:  # recorded per analysis, run continues
            report["analyses"][name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    report["all_passed"] = all(a.get("status") == "ok" for a in report["analyses"].values())
    return report, trace


def plot_rows(report: dict) -> list[tuple]:
    """Phase circles of the three constraint families and their pairwise intersections."""
    section = report.get("analyses", {}).get("theorem1")
    if not section or "certificate" not in section:
        return []
    fams = pauli_families()
    rows = []
    for fid, fam in fams.items():
        for k in range(PLOT_PHASES):
            phase = 2 * math.pi * k / PLOT_PHASES
            c = fam.coherence_point(phase)
            rows.append(("circle", fid, fam.phase_symbol, phase, c.real, c.imag))
    for entry in section["certificate"]["pairwise"]:
        if entry.get("state") is None:
            continue
        fid = entry["families"][0]
        state = np.array([[complex(*v) for v in row] for row in entry["state"]])
        c = framed(state, fams[fid])[0, 1]
        phase = float(np.angle(np.conj(c)) % (2 * math.pi))
        if 2 * math.pi - phase < 1e-9:
            phase = 0.0
        rows.append(("intersection", "&".join(entry["families"]), entry["bell_state"], phase, c.real, c.imag))
    return rows


def emit_plot_data(report: dict, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(PLOT_HEADER)
        for row in plot_rows(report):
            w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])
    return path


def write_trace(rows: list | None, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        rows = rows or [OptimizationResult.TRACE_HEADER]
        for row in rows:
            w.writerow([v if isinstance(v, str) else repr(v) for v in row])
    return path


def write_outputs(s: Scenario, report: dict, trace: list | None, out_dir: Path) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    text = dumps_report(report)
    paths["report"] = out_dir / s.output("report")
    paths["report"].write_text(text, encoding="utf-8")
    paths["plot"] = emit_plot_data(report, out_dir / s.output("plot"))
    if "optimize-not" in s.analyses:
        paths["trace"] = write_trace(trace, out_dir / s.output("trace"))
    return paths


def summarize(report: dict) -> list[str]:
    lines = [f"acflip {report['version']}  seed={report['seed']}"]
    for label, info in report.get("orders", {}).items():
        lines.append(f"  order {label}: {info['status']}" + (f" ({info['error']})" if "error" in info else ""))
    for name, sec in report["analyses"].items():
        detail = ""
        if name == "theorem1" and "certificate" in sec:
            cert = sec["certificate"]
            pts = ", ".join(f"{'∩'.join(p['families'])}={p['bell_state']}" for p in cert["pairwise"])
            detail = f"{pts}; triple empty={cert['triple']['empty']}"
        elif name == "classify" and "level" in sec:
            detail = f"level={sec['level']}"
        elif name == "optimize-not" and "worst_case_fidelity" in sec:
            detail = f"worst-case={sec['worst_case_fidelity']:.9f} oracle={sec['oracle_worst_case']:.9f}"
        elif "error" in sec:
            detail = sec["error"]
        lines.append(f"  [{'PASS' if sec.get('status') == 'ok' else 'FAIL'}] {name}: {detail}")
    return lines
