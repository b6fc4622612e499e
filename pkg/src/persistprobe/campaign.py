"""Sweeps over test variants, with per-point summaries and CVAP/CVAC comparison.

A campaign spec is a ``key = value`` file::

    test = ../litmus/sequential_arm.litmus   # relative to the spec file
    profile = arm-nopop
    sweep = persist_count                    # persist_count|sleep_ns|alloc_bytes|persist_kind
    values = 1-10, 20, 40                    # ranges a-b are inclusive
    repetitions = 5
    seed = 1
    mapping_seed = 1
    depth = 8000
    base_count = 100
    persist_counts = 1                       # persist_kind sweeps only
    alpha = 0.05
    two_sided = yes

Run seeds are ``seed XOR point_index`` with ``point_index = value_index *
repetitions + repetition``. For persist_kind sweeps ``value_index`` walks the
persist counts and the kind itself is not part of the index, so CVAP and CVAC
runs at one point share their seeds.
"""

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import flow
from .analysis import format_pct
from .litmus import Barrier, LitmusTest, Persist, PersistKind, Sleep, load_litmus
from .memsim import load_profile
from .stats import mann_whitney_u, spearman_rho

SWEEPS = ("persist_count", "sleep_ns", "alloc_bytes", "persist_kind")


class CampaignError(ValueError):
    pass


@dataclass
class CampaignSpec:
    test_path: str
    sweep: str
    values: list
    repetitions: int = 5
    profile: str = "arm-nopop"
    seed: int = 1
    mapping_seed: int = 1
    depth: int = flow.DEFAULT_DEPTH
    base_count: int = flow.DEFAULT_BASE_COUNT
    persist_counts: list = field(default_factory=lambda: [1])
    alpha: float = 0.05
    two_sided: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise CampaignError(f"unknown sweep {self.sweep!r}; expected one of {SWEEPS}")
        if not self.values:
            raise CampaignError("sweep domain is empty")
        if self.repetitions < 1:
            raise CampaignError("repetitions must be >= 1")
        if self.sweep == "persist_kind":
            self.values = [v if isinstance(v, PersistKind) else PersistKind(str(v).lower())
                           for v in self.values]
            bad = [v for v in self.values if v is PersistKind.CLFLUSH]
            if bad or not self.persist_counts:
                raise CampaignError("persist_kind sweeps take cvap/cvac and >= 1 persist count")
        else:
            self.values = [int(v) for v in self.values]
            lo = 1 if self.sweep in ("persist_count", "alloc_bytes") else 0
            if any(v < lo for v in self.values):
                raise CampaignError(f"{self.sweep} values must be >= {lo}")


def _int_list(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def parse_spec(text: str, base_dir: str = ".") -> CampaignSpec:
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CampaignError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        kv[k] = v
    try:
        sweep = kv.pop("sweep")
        test = kv.pop("test")
        values = kv.pop("values")
    except KeyError as e:
        raise CampaignError(f"missing key {e.args[0]}") from None
    args = {}
    for key in ("repetitions", "seed", "mapping_seed", "depth", "base_count", "workers"):
        if key in kv:
            args[key] = int(kv.pop(key))
    if "profile" in kv:
        profile = kv.pop("profile")
        path = os.path.join(base_dir, profile)
        args["profile"] = path if os.path.exists(path) else profile
    if "persist_counts" in kv:
        args["persist_counts"] = _int_list(kv.pop("persist_counts"))
    if "alpha" in kv:
        args["alpha"] = float(kv.pop("alpha"))
    if "two_sided" in kv:
        args["two_sided"] = kv.pop("two_sided").lower() in ("yes", "true", "1")
    if kv:
        raise CampaignError(f"unknown keys: {', '.join(sorted(kv))}")
    vals = ([s.strip() for s in values.split(",") if s.strip()] if sweep == "persist_kind"
            else _int_list(values))
    return CampaignSpec(os.path.join(base_dir, test), sweep, vals, **args)


def load_spec(path) -> CampaignSpec:
    with open(path, encoding="utf-8") as f:
        return parse_spec(f.read(), os.path.dirname(os.path.abspath(path)))


# -- test transforms ------------------------------------------------------

def _map_threads(test: LitmusTest, fn) -> LitmusTest:
    threads = tuple(tuple(out for ins in th for out in fn(ins)) for th in test.threads)
    return replace(test, threads=threads)


def with_persist_count(test: LitmusTest, count: int) -> LitmusTest:
    """Repeat every persist instruction ``count`` times."""
    return _map_threads(test, lambda i: [i] * count if isinstance(i, Persist) else [i])


def with_sleep(test: LitmusTest, ns: int) -> LitmusTest:
    """Insert a delay after every barrier; zero leaves the test unchanged."""
    if ns == 0:
        return test
    return _map_threads(test, lambda i: [i, Sleep(ns)] if isinstance(i, Barrier) else [i])


def with_alloc_bytes(test: LitmusTest, size: int) -> LitmusTest:
    return replace(test, locations=tuple(replace(d, size_bytes=size) for d in test.locations))


def with_persist_kind(test: LitmusTest, kind: PersistKind) -> LitmusTest:
    def swap(i):
        if isinstance(i, Persist) and i.kind in (PersistKind.CVAP, PersistKind.CVAC):
            return [replace(i, kind=kind)]
        return [i]
    return _map_threads(test, swap)


# -- execution ------------------------------------------------------------

@dataclass(frozen=True)
class Point:
    point_index: int
    value: object
    persist_count: int
    repetition: int
    seed: int


@dataclass
class Row:
    point: Point
    status: str
    reorderings: int = 0
    deviation_pct: object = 0
    signed_dev: dict = field(default_factory=dict)
    violating_iterations: int = 0
    error: str = ""


def points(spec: CampaignSpec) -> list:
    out = []
    if spec.sweep == "persist_kind":
        for vi, count in enumerate(spec.persist_counts):
            for kind in spec.values:
                for rep in range(spec.repetitions):
                    pi = vi * spec.repetitions + rep
                    out.append(Point(pi, kind, count, rep, spec.seed ^ pi))
    else:
        for vi, value in enumerate(spec.values):
            for rep in range(spec.repetitions):
                pi = vi * spec.repetitions + rep
                out.append(Point(pi, value, 1, rep, spec.seed ^ pi))
    return out


def variant(test: LitmusTest, spec: CampaignSpec, p: Point) -> LitmusTest:
    if spec.sweep == "persist_count":
        return with_persist_count(test, p.value)
    if spec.sweep == "sleep_ns":
        return with_sleep(test, p.value)
    if spec.sweep == "alloc_bytes":
        return with_alloc_bytes(test, p.value)
    return with_persist_count(with_persist_kind(test, p.value), p.persist_count)


def run_point(spec: CampaignSpec, test: LitmusTest, p: Point) -> Row:
    try:
        t = variant(test, spec, p)
        r = flow.execute(t, load_profile(spec.profile), mapping_seed=spec.mapping_seed,
                         seed=p.seed, depth=spec.depth, base_count=spec.base_count)
    except Exception as e:  # recorded as a failed row
        return Row(p, "failed", error=f"{type(e).__name__}: {e}")
    a = r.anomalies
    return Row(p, "ok", a.reorderings, a.deviation_pct, dict(a.signed_dev), r.violations)


def _run_star(args):
    return run_point(*args)


def run_rows(spec: CampaignSpec) -> list:
    test = load_litmus(spec.test_path)
    jobs = [(spec, test, p) for p in points(spec)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            return list(pool.map(_run_star, jobs))
    return [run_point(*j) for j in jobs]


# -- reporting ------------------------------------------------------------

def _value_str(v) -> str:
    return v.value if isinstance(v, PersistKind) else str(v)


def campaign_csv(spec: CampaignSpec, rows: list) -> str:
    locs = sorted({k for r in rows for k in r.signed_dev})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["point_index", "sweep", "value", "persist_count", "repetition", "seed",
                "status", "reorderings", "deviation_pct"]
               + [f"signed_dev.{k}" for k in locs] + ["violating_iterations", "error"])
    for r in rows:
        p = r.point
        w.writerow([p.point_index, spec.sweep, _value_str(p.value), p.persist_count,
                    p.repetition, p.seed, r.status, r.reorderings,
                    format_pct(r.deviation_pct)]
                   + [format_pct(r.signed_dev[k], signed=True) if k in r.signed_dev else ""
                      for k in locs]
                   + [r.violating_iterations, r.error])
    return buf.getvalue()


def _groups(rows, key):
    out = {}
    for r in rows:
        if r.status == "ok":
            out.setdefault(key(r.point), []).append(r)
    return out


def point_means(spec: CampaignSpec, rows: list) -> list:
    """``(value, mean reorderings, mean deviation)`` per sweep value, in sweep order."""
    if spec.sweep == "persist_kind":
        groups = _groups(rows, lambda p: (p.persist_count, p.value))
    else:
        groups = _groups(rows, lambda p: p.value)
    out = []
    for k, rs in groups.items():
        out.append((k, sum(r.reorderings for r in rs) / len(rs),
                    float(sum(r.deviation_pct for r in rs)) / len(rs)))
    return out


def kind_comparison(spec: CampaignSpec, rows: list) -> list:
    """Mann-Whitney CVAP vs CVAC per persist count, for reorderings and deviation."""
    groups = _groups(rows, lambda p: (p.persist_count, p.value))
    out = []
    for count in spec.persist_counts:
        a = groups.get((count, PersistKind.CVAP), [])
        b = groups.get((count, PersistKind.CVAC), [])
        if not a or not b:
            continue
        for metric in ("reorderings", "deviation_pct"):
            res = mann_whitney_u([float(getattr(r, metric)) for r in a],
                                 [float(getattr(r, metric)) for r in b],
                                 spec.alpha, spec.two_sided)
            out.append((count, metric, res))
    return out


def mwu_csv(table: list) -> str:
    lines = ["persist_count,metric,n_cvap,n_cvac,u,p_value,method,significant"]
    for count, metric, r in table:
        lines.append(f"{count},{metric},{r.n1},{r.n2},{r.u_statistic:g},{r.p_value:.6g},"
                     f"{r.method},{'yes' if r.significant else 'no'}")
    return "\n".join(lines) + "\n"


def summary_text(spec: CampaignSpec, rows: list) -> str:
    failed = sum(1 for r in rows if r.status != "ok")
    out = [f"Campaign: {spec.sweep} sweep of {os.path.basename(spec.test_path)} on "
           f"{os.path.basename(str(spec.profile))}, {spec.repetitions} repetition(s) per point",
           f"Rows: {len(rows)} ({failed} failed)", "",
           "value            mean reorderings   mean deviation %"]
    means = point_means(spec, rows)
    for k, mr, md in means:
        label = f"{k[0]}x{k[1].value}" if isinstance(k, tuple) else str(k)
        out.append(f"  {label:<16} {mr:>14.2f} {md:>18.2f}")
    if spec.sweep != "persist_kind" and len(means) >= 2:
        rho = spearman_rho([k for k, _, _ in means], [m for _, m, _ in means])
        out.append(f"Spearman rho(value, mean reorderings) = {rho:.4f}")
    if spec.sweep == "persist_kind":
        out += ["", f"CVAP vs CVAC (Mann-Whitney, alpha={spec.alpha}, "
                f"{'two' if spec.two_sided else 'one'}-sided):"]
        for count, metric, r in kind_comparison(spec, rows):
            out.append(f"  persists={count:<4} {metric:<14} U={r.u_statistic:g} "
                       f"p={r.p_value:.4f} ({r.method}) "
                       f"{'significant' if r.significant else 'not significant'}")
    return "\n".join(out) + "\n"


def run_campaign(spec: CampaignSpec, out_dir: str = None):
    """Run every point; returns the rows and writes CSV and summary if ``out_dir``."""
    rows = run_rows(spec)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        files = {"campaign.csv": campaign_csv(spec, rows),
                 "summary.txt": summary_text(spec, rows)}
        if spec.sweep == "persist_kind":
            files["mwu.csv"] = mwu_csv(kind_comparison(spec, rows))
        for name, text in files.items():
            with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
    return rows
