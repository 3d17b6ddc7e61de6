"""Command line entry point.

    stokes-dg-lab study convergence --config cfg.json [--equation stokes|heat] [--w 0|1] [--norm l2l2|l2h1]
    stokes-dg-lab study probe --kind stability|bestapprox|infsup|leray_h1 --config cfg.json
    stokes-dg-lab mesh dump --domain unit_square|l_shape --n 8 --out mesh.json

Study commands print one line per check and write ``<output>.csv`` and
``<output>.json`` when an output prefix is configured.  The exit code is 0
iff every pass criterion is met.
"""
from __future__ import annotations

import argparse
import sys

from .harness import PROBES, StudyConfig, run_convergence_study, run_probe, write_report
from .mesh import build_domain


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stokes-dg-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="group", required=True)

    study = sub.add_parser("study", help="convergence studies and probes")
    ssub = study.add_subparsers(dest="command", required=True)
    conv = ssub.add_parser("convergence", help="error norms and observed orders")
    conv.add_argument("--config", required=True)
    conv.add_argument("--equation", choices=("stokes", "heat"))
    conv.add_argument("--w", type=int, choices=(0, 1))
    conv.add_argument("--norm", choices=("l2l2", "l2h1"))
    conv.add_argument("--output", help="output prefix (overrides the config)")
    probe = ssub.add_parser("probe", help="stability, best-approximation, inf-sup or Leray probes")
    probe.add_argument("--kind", required=True, choices=PROBES)
    probe.add_argument("--config", required=True)
    probe.add_argument("--output", help="output prefix (overrides the config)")

    mesh = sub.add_parser("mesh", help="mesh utilities")
    msub = mesh.add_subparsers(dest="command", required=True)
    dump = msub.add_parser("dump", help="write a mesh as JSON")
    dump.add_argument("--domain", required=True, choices=("unit_square", "l_shape"))
    dump.add_argument("--n", required=True, type=int)
    dump.add_argument("--out", required=True)
    return ap


def _emit(report, output) -> None:
    for name, check in report.checks.items():
        print(f"{report.kind} {name}: {'PASS' if check.get('passed') else 'FAIL'} {check}")
    for row in report.rows:
        if row.get("status") != "ok":
            print(f"cell n={row.get('n')} M={row.get('M')} failed: {row.get('message')}")
    if output:
        write_report(report, "csv", f"{output}.csv")
        write_report(report, "json", f"{output}.json")
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.group == "mesh":
        build_domain(args.domain, args.n).dump(args.out)
        return 0
    try:
        if args.command == "convergence":
            cfg = StudyConfig.load(args.config, equation=args.equation, w=args.w,
                                   norms=[args.norm] if args.norm else None)
            report = run_convergence_study(cfg)
        else:
            cfg = StudyConfig.load(args.config)
            report = run_probe(args.kind, cfg)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(report, args.output or cfg.output)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
