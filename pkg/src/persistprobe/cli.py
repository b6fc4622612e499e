"""Command line entry point."""

import argparse
import sys

from . import analysis, campaign, flow
from .addressing import GeometricAddress
from .buslogger import read_csv
from .litmus import load_litmus
from .memsim import default_profiles


def read_assignment(path) -> dict:
    """``name=bg,bank,row,col`` lines; a ``report.kv`` works too (``assign.`` keys)."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line or "=" not in line:
                continue
            k, v = (s.strip() for s in line.split("=", 1))
            if k.startswith("assign."):
                k = k[len("assign."):]
            elif "." in k or v.count(",") != 3:
                continue
            try:
                out[k] = GeometricAddress(*(int(p) for p in v.split(",")))
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: bad address {v!r}: {e}") from None
    if not out:
        raise ValueError(f"{path}: no assignments found")
    return out


def cmd_run(args) -> int:
    cfg = flow.FlowConfig(args.test, args.profile, args.mapping_seed, args.seed, args.depth,
                          args.base_count, args.out)
    r = flow.run_flow(cfg)
    sys.stdout.write(flow.report_text(r) if args.verbose else flow.report_kv(r))
    return 0 if r.held else 2


def cmd_campaign(args) -> int:
    spec = campaign.load_spec(args.spec)
    if args.workers:
        spec.workers = args.workers
    rows = campaign.run_campaign(spec, args.out)
    sys.stdout.write(campaign.summary_text(spec, rows))
    return 0


def cmd_analyze(args) -> int:
    trace = read_csv(args.log)
    assignment = read_assignment(args.assignment)
    test = load_litmus(args.test)
    missing = set(test.names) - set(assignment)
    if missing:
        raise ValueError(f"assignment lacks locations: {', '.join(sorted(missing))}")
    assignment = {k: assignment[k] for k in test.names}
    rep = analysis.analyze_trace(trace, assignment, test)
    bad = sum(1 for v in rep.verdict_per_iteration if not v)
    lines = [f"records={len(trace)}",
             f"deviation_pct={analysis.format_pct(rep.deviation_pct)}"]
    lines += [f"signed_dev.{k}={analysis.format_pct(v, signed=True)}"
              for k, v in rep.signed_dev.items()]
    lines += [f"reorderings={rep.reorderings}",
              f"iterations_checked={len(rep.verdict_per_iteration)}",
              f"violating_iterations={bad}",
              f"verdict={'no_data' if rep.no_data else ('held' if bad == 0 and rep.reorderings == 0 else 'violated')}"]
    for a in rep.positions:
        lines.append(f"anomaly={a.iteration},{a.kind},{a.location}")
    print("\n".join(lines))
    return 0 if not rep.no_data and bad == 0 and rep.reorderings == 0 else 2


def cmd_profiles(args) -> int:
    for name, p in default_profiles().items():
        print(f"[{name}]")
        print(p.to_text().rstrip())
        print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="persistprobe",
                                 description="Persistency litmus testing against an emulated "
                                             "memory system with a bus probe.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one validation flow")
    p.add_argument("--test", required=True, help="litmus file")
    p.add_argument("--profile", default="arm-nopop", help="built-in name or profile file")
    p.add_argument("--mapping-seed", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--depth", type=int, default=flow.DEFAULT_DEPTH)
    p.add_argument("--base-count", type=int, default=flow.DEFAULT_BASE_COUNT)
    p.add_argument("--out", help="report directory")
    p.add_argument("-v", "--verbose", action="store_true", help="print the text report")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("campaign", help="run a sweep campaign")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, default=0, help="parallel processes")
    p.set_defaults(fn=cmd_campaign)

    p = sub.add_parser("analyze", help="analyze a captured body CSV offline")
    p.add_argument("--log", required=True, help="body trace CSV")
    p.add_argument("--assignment", required=True, help="name=bg,bank,row,col lines or report.kv")
    p.add_argument("--test", required=True, help="litmus file giving the expected pattern")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("profiles", help="list built-in architecture profiles")
    p.set_defaults(fn=cmd_profiles)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError, KeyError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
