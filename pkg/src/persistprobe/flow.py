"""End-to-end validation flow and its report files.

Steps, in order: parse the test, arm the probe on the first write, run the
strict preamble, capture and export it, fingerprint the locations
(retrying on fresh allocations), derive the storage-qualification mask,
run the body, capture it under the mask, filter, and compute metrics.
"""

import os
from dataclasses import dataclass, field
from typing import Optional

from . import analysis
from .addressing import compute_wildcard_mask, random_mapping
from .analysis import AnomalyReport, FingerprintError, FingerprintResult, Histogram, format_pct
from .buslogger import DEFAULT_DEPTH, CaptureConfig, Trace, capture, export_csv
from .litmus import LitmusTest, expected_pattern, load_litmus
from .memsim import ArchKind, ArchProfile, Machine, load_profile

DEFAULT_BASE_COUNT = 100
DEFAULT_MEMORY_BITS = 30
MAX_RETRIES = 3


class FlowError(RuntimeError):
    pass


@dataclass
class FlowConfig:
    test_path: str
    profile: str = "arm-nopop"
    mapping_seed: int = 1
    seed: int = 1
    depth: int = DEFAULT_DEPTH
    base_count: int = DEFAULT_BASE_COUNT
    out_dir: Optional[str] = None
    memory_bits: int = DEFAULT_MEMORY_BITS
    buckets: int = 10


@dataclass
class RunReport:
    test_name: str
    profile_name: str
    profile: ArchProfile
    mapping_seed: int
    seed: int
    depth: int
    base_count: int
    iterations: int
    attempts: int
    fingerprint: FingerprintResult
    mask: object
    preamble_trace: Trace
    body_trace: Trace
    filtered_records: int
    issued: dict
    persisted: dict
    anomalies: AnomalyReport
    histogram: Histogram
    ground_truth_reorderings: Optional[int]
    fingerprint_correct: bool
    mapping_text: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return sum(1 for v in self.anomalies.verdict_per_iteration if not v)

    @property
    def held(self) -> bool:
        return (not self.anomalies.no_data and self.violations == 0
                and self.anomalies.reorderings == 0)

    @property
    def verdict(self) -> str:
        if self.anomalies.no_data:
            return "no_data"
        return "held" if self.held else "violated"

    @property
    def reorderings_pct(self):
        from fractions import Fraction
        return Fraction(self.anomalies.reorderings * 100, self.iterations)


def preamble_counts(test: LitmusTest, base_count: int = DEFAULT_BASE_COUNT) -> dict:
    return {d.name: base_count * d.ratio for d in test.locations}


def locate(machine: Machine, test: LitmusTest, base_count: int = DEFAULT_BASE_COUNT,
           depth: int = DEFAULT_DEPTH, max_retries: int = MAX_RETRIES):
    """Allocate, run the strict preamble and fingerprint, retrying on fresh blocks.

    Returns ``(fingerprint, attempts, preamble_trace)``.
    """
    counts = preamble_counts(test, base_count)
    last_error = None
    for attempt in range(1, max_retries + 2):
        for d in test.locations:
            machine.allocate(d)
        start = len(machine.bus)
        machine.run_preamble(counts)
        trace = capture(machine.bus[start:], CaptureConfig(depth))
        try:
            fp = analysis.fingerprint(trace, counts)
        except FingerprintError as e:
            last_error = e
            continue
        if not fp.ambiguous:
            return fp, attempt, trace
        last_error = FingerprintError(f"ambiguous fingerprint on attempt {attempt}")
    raise FlowError(f"fingerprinting failed after {max_retries} retries: {last_error}")


def execute(test: LitmusTest, profile: ArchProfile, *, mapping_seed: int = 1, seed: int = 1,
            depth: int = DEFAULT_DEPTH, base_count: int = DEFAULT_BASE_COUNT,
            memory_bits: int = DEFAULT_MEMORY_BITS, buckets: int = 10,
            test_name: str = "test", profile_name: str = "custom") -> RunReport:
    pattern = expected_pattern(test)
    if depth < 2 * len(pattern):
        raise FlowError(f"depth {depth} cannot hold one iteration of pattern {pattern.tokens}")
    mapping = random_mapping(mapping_seed, memory_bits)
    machine = Machine(profile, mapping, seed)

    fp, attempts, pre_trace = locate(machine, test, base_count, depth)
    truth = {name: machine._geo(machine.alloc_map[name] >> 6) for name in test.names}
    mask = compute_wildcard_mask(fp.assignment.values())

    machine.run_body(test)
    body_trace = capture(machine.bus[machine.body_start:], CaptureConfig(depth, mask))
    filtered = analysis.filter_trace(body_trace, fp.assignment.values())
    issued = {k: v for k, v in machine.issued.items() if v > 0}
    anomalies = analysis.analyze_trace(filtered, fp.assignment, test, issued)
    persisted = analysis.persisted_counts(filtered, fp.assignment)
    hist = analysis.anomaly_distribution(anomalies.positions, test.iterations, buckets,
                                         test.names)
    gt = None
    if profile.kind is not ArchKind.ARM_NOPOP:
        gt = analysis.sequence_reorderings([loc for _, loc in machine.ground_truth])
    return RunReport(
        test_name=test_name, profile_name=profile_name, profile=profile,
        mapping_seed=mapping_seed, seed=seed, depth=depth, base_count=base_count,
        iterations=test.iterations, attempts=attempts, fingerprint=fp, mask=mask,
        preamble_trace=pre_trace, body_trace=body_trace, filtered_records=len(filtered),
        issued=issued, persisted=persisted, anomalies=anomalies, histogram=hist,
        ground_truth_reorderings=gt, fingerprint_correct=(fp.assignment == truth),
        mapping_text=mapping.serialize())


def run_flow(cfg: FlowConfig) -> RunReport:
    test = load_litmus(cfg.test_path)
    profile = load_profile(cfg.profile)
    name = os.path.splitext(os.path.basename(cfg.test_path))[0]
    report = execute(test, profile, mapping_seed=cfg.mapping_seed, seed=cfg.seed,
                     depth=cfg.depth, base_count=cfg.base_count, memory_bits=cfg.memory_bits,
                     buckets=cfg.buckets, test_name=name,
                     profile_name=os.path.basename(str(cfg.profile)))
    if cfg.out_dir:
        write_report_dir(report, cfg.out_dir)
    return report


def _addr_csv(a) -> str:
    return f"{a.bank_group},{a.bank},{a.row},{a.column}"


def report_kv(r: RunReport) -> str:
    a = r.anomalies
    rows = [
        ("test", r.test_name),
        ("profile", r.profile_name),
        ("kind", r.profile.kind.value),
        ("mapping_seed", r.mapping_seed),
        ("seed", r.seed),
        ("depth", r.depth),
        ("base_count", r.base_count),
        ("iterations", r.iterations),
        ("fingerprint_attempts", r.attempts),
        ("fingerprint_fallback", int(r.fingerprint.fallback)),
        ("fingerprint_ambiguous", int(r.fingerprint.ambiguous)),
    ]
    rows += [(f"assign.{k}", _addr_csv(v)) for k, v in r.fingerprint.assignment.items()]
    rows += [
        ("mask", str(r.mask)),
        ("mask_fixed_bits", r.mask.fixed_bits),
        ("preamble_records", len(r.preamble_trace)),
        ("body_records", len(r.body_trace)),
        ("filtered_records", r.filtered_records),
    ]
    rows += [(f"issued.{k}", v) for k, v in r.issued.items()]
    rows += [(f"persisted.{k}", r.persisted.get(k, 0)) for k in r.issued]
    rows += [(f"signed_dev.{k}", format_pct(v, signed=True)) for k, v in a.signed_dev.items()]
    rows += [
        ("deviation_pct", format_pct(a.deviation_pct)),
        ("reorderings", a.reorderings),
        ("reorderings_pct", format_pct(r.reorderings_pct)),
        ("iterations_checked", len(a.verdict_per_iteration)),
        ("violating_iterations", r.violations),
        ("verdict", r.verdict),
    ]
    gt = r.ground_truth_reorderings
    rows.append(("ground_truth_reorderings", "n/a" if gt is None else gt))
    if gt is None:
        coincide = "n/a"
    else:
        coincide = "yes" if (a.reorderings > 0) == (gt > 0) else "no"
    rows.append(("bus_ground_truth_coincide", coincide))
    return "".join(f"{k}={v}\n" for k, v in rows)


def report_text(r: RunReport) -> str:
    a = r.anomalies
    out = [
        f"Persistency flow report: {r.test_name} on {r.profile_name} ({r.profile.kind.value})",
        f"  seeds: mapping={r.mapping_seed} run={r.seed}; depth {r.depth}; "
        f"preamble base count {r.base_count}",
        "",
        f"Fingerprint ({r.attempts} attempt(s), "
        f"{'ratio fallback' if r.fingerprint.fallback else 'exact counts'}):",
    ]
    for k, v in r.fingerprint.assignment.items():
        out.append(f"  {k:<8} -> {v}  [{v.bits()}]")
    out += [
        f"Storage qualification mask: {r.mask}  ({r.mask.fixed_bits}/32 bits fixed)",
        "",
        f"Captured {len(r.preamble_trace)} preamble and {len(r.body_trace)} body records; "
        f"{r.filtered_records} remain after filtering.",
        "",
        "Writes           issued  persisted  signed dev",
    ]
    for k, v in r.issued.items():
        out.append(f"  {k:<12} {v:>8} {r.persisted.get(k, 0):>10} "
                   f"{format_pct(a.signed_dev[k], signed=True):>10}%")
    out += [
        f"Deviation: {format_pct(a.deviation_pct)}%",
        f"Reorderings: {a.reorderings} ({format_pct(r.reorderings_pct)}% of "
        f"{r.iterations} iterations)",
        f"Post-condition: {r.verdict}; {r.violations} of {len(a.verdict_per_iteration)} "
        "iteration windows violate the expected persist pattern",
    ]
    gt = r.ground_truth_reorderings
    if gt is None:
        out.append("Ground truth: undefined for this architecture (no point of persistence)")
    else:
        out.append(f"Ground truth: {gt} persist-order reorderings "
                   f"({'matches' if (gt > 0) == (a.reorderings > 0) else 'differs from'} "
                   "the bus observation)")
    out += ["", "Anomaly distribution:"]
    h = r.histogram
    for (kind, loc), counts in h.counts.items():
        out.append(f"  {kind}({loc}): {' '.join(str(c) for c in counts)}")
    out += ["", "Mapping (geometric bit: physical bit taps):", r.mapping_text.rstrip()]
    return "\n".join(out) + "\n"


def histogram_csv(h: Histogram) -> str:
    keys = list(h.counts)
    lines = [",".join(["bucket", "iteration_start", "iteration_end"]
                      + [f"{kind}:{loc}" for kind, loc in keys])]
    for b in range(h.buckets):
        lo, hi = h.bucket_bounds(b)
        lines.append(",".join([str(b), str(lo), str(hi)] + [str(h.counts[k][b]) for k in keys]))
    return "\n".join(lines) + "\n"


def write_report_dir(r: RunReport, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "preamble.csv": export_csv(r.preamble_trace),
        "body.csv": export_csv(r.body_trace),
        "report.txt": report_text(r),
        "report.kv": report_kv(r),
        "histogram.csv": histogram_csv(r.histogram),
    }
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
