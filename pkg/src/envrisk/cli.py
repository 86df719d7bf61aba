"""Command-line front end.

Exit codes: 0 success, 2 malformed scenario file, 3 invalid configuration or
arguments, 4 numeric failure, 5 verification violations.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import __version__
from .choquet import choquet_distorted
from .classical import LevelMeasure, avar, rvar, var, wvar
from .envmeasure import EnvMeasureSpec, outer_risk, risk_profile
from .errors import EnvRiskError, MalformedInput
from .gbm import GbmSpec, closed_form_rho, pipeline_rho
from .model import Binning, build_conditional_model, read_scenarios_csv
from .suites import SUITES, run_suite

log = logging.getLogger("envrisk")

EXIT_OK = 0
EXIT_CSV = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4
EXIT_VIOLATION = 5

GBM_CHECK_TOL = 5e-3


class ConfigError(EnvRiskError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _threads() -> int | None:
    raw = os.environ.get("ENVRISK_THREADS")
    if not raw:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer ENVRISK_THREADS=%r", raw)
        return None


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def parse_binning(obj: Any) -> Binning:
    if obj is None:
        return Binning.distinct()
    if not isinstance(obj, dict):
        raise ConfigError("binning must be an object")
    mode = obj.get("mode", "distinct-values")
    if mode in ("equiprobable", "equiprobable-k"):
        return Binning.equiprobable(obj.get("k", 0))
    return Binning(mode)


def load_config(path: Path) -> dict[str, Any]:
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if not isinstance(cfg, dict) or "spec" not in cfg:
        raise ConfigError("config must be an object with a 'spec' entry")
    try:
        spec = EnvMeasureSpec.from_json(cfg["spec"])
        binning = parse_binning(cfg.get("binning"))
        comps = cfg.get("comparatives", {}) or {}
        levels = {
            "var": [float(a) for a in comps.get("var", [])],
            "avar": [float(a) for a in comps.get("avar", [])],
            "wvar": [LevelMeasure.from_json(m) for m in comps.get("wvar", [])],
            "rvar": [(float(a1), float(a2)) for a1, a2 in comps.get("rvar", [])],
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    return {"spec": spec, "binning": binning, "comparatives": levels}


def compute_report(scenarios: Path, config: Path, with_meta: bool = True) -> dict[str, Any]:
    started = time.perf_counter()
    table = read_scenarios_csv(scenarios)
    cfg = load_config(config)
    spec, binning = cfg["spec"], cfg["binning"]
    try:
        model = build_conditional_model(table, binning)
        profile = risk_profile(model, spec, _threads())
        outer = outer_risk(profile, spec.outer)
        pooled = table.marginal_x()
        comps = cfg["comparatives"]
        comparatives = {
            "var": [{"level": a, "value": var(pooled, a)} for a in comps["var"]],
            "avar": [{"level": a, "value": avar(pooled, a)} for a in comps["avar"]],
            "wvar": [{"measure": m.to_json(), "value": wvar(pooled, m)} for m in comps["wvar"]],
            "rvar": [{"range": [a1, a2], "value": rvar(pooled, a1, a2)} for a1, a2 in comps["rvar"]],
        }
    except MalformedInput:
        raise
    except EnvRiskError as exc:
        raise ConfigError(str(exc)) from None

    report: dict[str, Any] = {
        "inputs": {
            "scenarios": {"path": str(scenarios), "sha256": _sha256(scenarios), "rows": len(table)},
            "config": {"path": str(config), "sha256": _sha256(config)},
            "spec": spec.to_json(),
            "binning": {"mode": binning.mode, "k": binning.k},
        },
        "profile": [
            {"z": float(z), "p_z": float(p), "rho_z": float(r)}
            for z, p, r in zip(profile.states, profile.state_probs, profile.values)
        ],
        "outer": outer,
        "pooled_mean": pooled.mean(),
        "comparatives": comparatives,
    }
    values = [outer] + [r["rho_z"] for r in report["profile"]]
    values += [c["value"] for group in comparatives.values() for c in group]
    if not all(math.isfinite(v) for v in values):
        raise FloatingPointError("non-finite risk value")
    if with_meta:
        report["meta"] = {
            "version": __version__,
            "generated_at": datetime.now(timezone.utc).isoformat(),
            "elapsed_seconds": time.perf_counter() - started,
        }
    return report


def report_is_consistent(report: dict[str, Any], tol: float = 1e-12) -> bool:
    """Recompute the outer value from the stored profile and outer distortion."""
    from .envmeasure import RiskProfile
    import numpy as np

    spec = EnvMeasureSpec.from_json(report["inputs"]["spec"])
    prof = RiskProfile(
        np.array([r["z"] for r in report["profile"]]),
        np.array([r["p_z"] for r in report["profile"]]),
        np.array([r["rho_z"] for r in report["profile"]]),
    )
    return abs(choquet_distorted(prof.law(), spec.outer) - report["outer"]) <= tol


def cmd_compute(args) -> int:
    try:
        report = compute_report(Path(args.scenarios), Path(args.config), with_meta=not args.no_meta)
    except MalformedInput as exc:
        print(f"malformed scenarios: {exc}", file=sys.stderr)
        return EXIT_CSV
    except OSError as exc:
        print(f"cannot read scenarios: {exc}", file=sys.stderr)
        return EXIT_CSV
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    print(f"outer risk: {report['outer']:.12g}", file=sys.stderr)
    return EXIT_OK


def cmd_gbm(args) -> int:
    try:
        spec = GbmSpec(args.r, args.sigma, args.sigma2, args.a, args.b, args.multiple)
        closed = closed_form_rho(spec)
    except EnvRiskError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"closed_form  {closed:.12f}")
    if not args.check:
        return EXIT_OK
    try:
        approx = pipeline_rho(spec, args.states)
    except EnvRiskError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    gap = abs(approx - closed) / abs(closed)
    ok = gap < GBM_CHECK_TOL
    print(f"pipeline     {approx:.12f}  (states={args.states})")
    print(f"rel_gap      {gap:.3e}")
    print(f"check        {'PASS' if ok else 'FAIL'} (tolerance {GBM_CHECK_TOL:g})")
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_CONFIG
    if args.trials < 1:
        print("trials must be positive", file=sys.stderr)
        return EXIT_CONFIG
    result = run_suite(args.suite, args.trials, args.seed)
    print(result.table())
    if args.report:
        Path(args.report).write_text(json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if result.ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="envrisk", description="Two-layer distortion risk measures in random environments.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compute", help="risk report for a scenario CSV")
    p.add_argument("--scenarios", required=True, help="CSV with header weight,x,z[,y]")
    p.add_argument("--config", required=True, help="JSON with binning, spec and comparative levels")
    p.add_argument("--out", default="-", help="report path ('-' for stdout)")
    p.add_argument("--no-meta", action="store_true", help="omit timestamps and timing for byte-stable output")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("gbm", help="closed-form risk of the lognormal-environment derivative")
    p.add_argument("--r", type=float, default=0.05)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--sigma2", type=float, default=0.3)
    p.add_argument("--a", type=float, default=0.95)
    p.add_argument("--b", type=float, default=0.95)
    p.add_argument("--multiple", type=float, default=1.0)
    p.add_argument("--states", type=int, default=2000)
    p.add_argument("--check", action="store_true", help="cross-check against the discretized pipeline")
    p.set_defaults(func=cmd_gbm)

    p = sub.add_parser("verify", help="run a seeded property suite")
    p.add_argument("--suite", required=True, help=f"one of {', '.join(SUITES)}")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="also write the result table as JSON")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
