"""``verify`` command line: run scenario suites, list targets, probe kernels."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .errors import ParseError, ScenarioInvalid, VarfracError
from .scenarios import TARGETS, Scenario, VerificationReport, run_scenario_safe

OUT_ENV = "VERIFY_OUT_DIR"
EXIT_PASS, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


def default_suite_path() -> Path:
    return Path(str(resources.files("varfrac") / "data" / "default_suite.json"))


def load_suite(path: str | Path, seed: int = 0) -> list[Scenario]:
    """Parse a suite file: a list of scenarios or ``{"scenarios": [...]}``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    items = data.get("scenarios") if isinstance(data, dict) else data
    if not isinstance(items, list):
        raise ParseError(f"{path}: expected a list of scenarios or an object with a 'scenarios' list")
    out, seen = [], set()
    for i, d in enumerate(items):
        s = Scenario.from_dict(d, where=f"{path.name}:scenarios[{i}]")
        if s.id in seen:
            raise ParseError(f"{path.name}:scenarios[{i}].id: duplicate id {s.id!r}")
        seen.add(s.id)
        s.seed += seed
        out.append(s)
    return out


def _run_one(s: Scenario) -> VerificationReport:
    return run_scenario_safe(s)


def run_suite(path: str | Path, out_dir: str | Path | None = None, jobs: int = 1, seed: int = 0,
              stream=None) -> int:
    """Run every scenario, write one JSON per scenario plus ``suite.csv``; return the exit code."""
    stream = stream or sys.stdout
    try:
        scenarios = load_suite(path, seed)
        if jobs > 1 and len(scenarios) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                reports = list(pool.map(_run_one, scenarios))
        else:
            reports = [_run_one(s) for s in scenarios]
    except (ParseError, ScenarioInvalid) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(out_dir or os.environ.get(OUT_ENV) or "verify_reports")
    out.mkdir(parents=True, exist_ok=True)
    for rep in reports:
        (out / f"{rep.id}.json").write_text(rep.to_json() + "\n")
    (out / "suite.csv").write_text(suite_csv(reports))
    for rep in reports:
        extra = "" if rep.passed else f"  failing: {', '.join(rep.failing_cases()) or rep.error or _failed_checks(rep)}"
        print(f"{rep.verdict.upper():5s} {rep.id} [{rep.target}] max_ratio={_fmt(rep.max_ratio)}{extra}", file=stream)
    print(f"{sum(r.passed for r in reports)}/{len(reports)} scenarios passed; reports in {out}", file=stream)
    return EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL


def _failed_checks(rep: VerificationReport) -> str:
    return ", ".join(k for k, v in rep.checks.items() if not v) or "no checks recorded"


def _fmt(v) -> str:
    return repr(float(v)) if v is not None and math.isfinite(float(v)) else str(v)


def suite_csv(reports: list[VerificationReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario_id", "target", "max_ratio", "verdict"])
    for r in reports:
        w.writerow([r.id, r.target, _fmt(r.max_ratio), r.verdict])
    return buf.getvalue()


def list_scenarios(path: str | Path | None = None) -> str:
    """Table of the known targets, followed by the scenarios of ``path`` (default: the bundled suite)."""
    lines = ["target               description"]
    lines += [f"{k:20s} {v}" for k, v in TARGETS.items()]
    suite = Path(path) if path else default_suite_path()
    lines += ["", f"scenarios in {suite.name}:", "id                               target"]
    for s in load_suite(suite):
        lines.append(f"{s.id:32s} {s.target}")
    return "\n".join(lines)


def _parse_params(items: list[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ParseError(f"probe parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def probe_kernel(name: str, params: dict) -> dict:
    """Hormander and size probes for a named kernel; ``params`` may set
    beta_param, alpha, lam, r, beta, variant, depths, window, M_max."""
    from . import exponent as ex
    from .grid import Interval
    from .kernels import FamilySpec, hormander_class_probe, kernel_from_name, size_condition_probe

    K = kernel_from_name(name, float(params.get("beta_param", 1.0)), float(params.get("alpha", 0.5)),
                         float(params.get("lam", 1.0)))
    r = ex.from_spec(params.get("r", 2.0))
    beta = ex.from_spec(params.get("beta", "inf"))
    d = params.get("depths", [0, 6])
    w = params.get("window", [-16, 48])
    fam = FamilySpec(Interval(float(w[0]), float(w[1])), (int(d[0]), int(d[1])), int(params.get("shifts", 2)))
    variants = [int(params["variant"])] if "variant" in params else [1, 2]
    out = {"kernel": K.name}
    for v in variants:
        h = hormander_class_probe(K, beta, r, v, fam, M_max=int(params.get("M_max", 40)))
        sz = size_condition_probe(K, beta, r, v, fam)
        out[f"variant_{v}"] = {"hormander": h.as_dict(full=False), "size": sz.as_dict()}
    return out


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="verify", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run a scenario suite")
    run.add_argument("suite", nargs="?", default=None, help="suite JSON (default: the bundled suite)")
    run.add_argument("--out", default=None, help=f"report directory (default ${OUT_ENV} or ./verify_reports)")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    lst = sub.add_parser("list", help="list targets and the scenarios of a suite")
    lst.add_argument("suite", nargs="?", default=None)
    pk = sub.add_parser("probe-kernel", help="Hormander/size probes for a kernel")
    pk.add_argument("name", help="K, Ktilde, fractional or zero")
    pk.add_argument("params", nargs="*", help="key=value pairs (values parsed as JSON when possible)")
    args = ap.parse_args(argv)
    try:
        if args.cmd == "run":
            return run_suite(args.suite or default_suite_path(), args.out, args.jobs, args.seed)
        if args.cmd == "list":
            print(list_scenarios(args.suite))
            return EXIT_PASS
        result = probe_kernel(args.name, _parse_params(args.params))
        print(json.dumps(_json_safe(result), indent=2, sort_keys=True))
        return EXIT_PASS
    except (ParseError, ScenarioInvalid, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except VarfracError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def _json_safe(v):
    from .scenarios import _clean

    return _clean(v)


if __name__ == "__main__":
    sys.exit(main())
