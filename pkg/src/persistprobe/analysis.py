"""Offline trace analysis: fingerprinting, filtering, reorderings, deviation."""

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .buslogger import Trace
from .litmus import LitmusTest, PersistPattern, expected_pattern

RATIO_TOLERANCE = Fraction(1, 10)

MISSING_OR_SWAPPED = "MISSING_OR_SWAPPED"
EXTRA = "EXTRA"


class AnalysisError(ValueError):
    pass


class FingerprintError(AnalysisError):
    """No address matches some location; the caller should retry."""


@dataclass
class FingerprintResult:
    assignment: dict
    ambiguous: bool = False
    fallback: bool = False
    counts: dict = field(default_factory=dict)


class Anomaly(NamedTuple):
    iteration: int
    kind: str
    location: str


@dataclass
class AnomalyReport:
    reorderings: int = 0
    positions: list = field(default_factory=list)
    deviation_pct: Fraction = Fraction(0)
    signed_dev: dict = field(default_factory=dict)
    verdict_per_iteration: list = field(default_factory=list)
    no_data: bool = False


@dataclass
class Verdicts:
    verdicts: list
    no_data: bool = False

    @property
    def violations(self) -> int:
        return sum(1 for v in self.verdicts if not v)

    @property
    def held(self) -> bool:
        return not self.no_data and all(self.verdicts)


@dataclass
class Histogram:
    buckets: int
    iterations: int
    counts: dict

    def bucket_bounds(self, b: int):
        return (b * self.iterations // self.buckets, (b + 1) * self.iterations // self.buckets)


def fingerprint(trace: Trace, expected: dict, tolerance: Fraction = RATIO_TOLERANCE
                ) -> FingerprintResult:
    """Identify each location's geometric address from its preamble write count.

    Exact count matches win. A location with no exact match falls back to
    the closest count within ``tolerance`` (relative) of its expected count.
    ``ambiguous`` is set when some location had more than one candidate or
    the fallback picks do not keep the expected count ordering.
    """
    if len(set(expected.values())) != len(expected):
        raise AnalysisError("expected counts must be pairwise distinct")
    counts = Counter(r.addr for r in trace.records)
    assignment = {}
    ambiguous = fallback = False
    used = set()
    for name, n in expected.items():
        exact = [a for a, c in counts.items() if c == n]
        if exact:
            assignment[name] = exact[0]
            used.add(exact[0])
            ambiguous |= len(exact) > 1
    for name, n in sorted(expected.items(), key=lambda kv: kv[1]):
        if name in assignment:
            continue
        fallback = True
        near = [(abs(Fraction(c, n) - 1), i, a) for i, (a, c) in enumerate(counts.items())
                if a not in used and abs(Fraction(c, n) - 1) <= tolerance]
        if not near:
            raise FingerprintError(f"no geometric address written ~{n} times for {name}")
        near.sort()
        assignment[name] = near[0][2]
        used.add(near[0][2])
        ambiguous |= len(near) > 1
    if fallback:
        by_expected = sorted(expected, key=expected.get)
        got = [counts[assignment[name]] for name in by_expected]
        ambiguous |= any(a >= b for a, b in zip(got, got[1:]))
    return FingerprintResult(assignment, ambiguous, fallback,
                             {assignment[k]: counts[assignment[k]] for k in assignment})


def filter_trace(trace: Trace, addrs) -> Trace:
    keep = set(addrs)
    return Trace([r for r in trace.records if r.addr in keep], trace.config)


def _locations(trace: Trace, assignment: dict):
    by_addr = {a: name for name, a in assignment.items()}
    out = []
    for r in trace.records:
        try:
            out.append(by_addr[r.addr])
        except KeyError:
            raise AnalysisError(f"trace record {r.index} at {r.addr} is not in the assignment "
                                "(filter the trace first)") from None
    return out


def _walk(locs, tokens):
    """Split a location sequence into iteration windows.

    Returns ``(windows, per_record)`` where each window is ``[violated,
    complete]`` and ``per_record[i]`` is ``(window index, token due)`` for
    record i. After a violation the walker skips records until the next
    pattern-start token, which opens a new window. A record arriving when a
    start token was due (and is not one) opens a window that is violated
    from the outset.
    """
    windows = []
    per_record = []
    n = len(tokens)
    k = 0
    synced = True
    for loc in locs:
        due = tokens[k] if synced else tokens[0]
        if k == 0 and loc == tokens[0]:
            windows.append([False, False])
            k, synced = 1, True
        elif not synced:
            pass
        elif k == 0:
            windows.append([True, False])
            synced = False
        elif loc == tokens[k]:
            k += 1
        else:
            windows[-1][0] = True
            if loc == tokens[0]:
                windows.append([False, False])
                k = 1
            else:
                k, synced = 0, False
        if synced and k == n:
            windows[-1][1] = True
            k = 0
        per_record.append((len(windows) - 1, due))
    return windows, per_record


def _expected_repeats(tokens):
    n = len(tokens)
    return {tokens[i] for i in range(n) if tokens[i] == tokens[(i + 1) % n]}


def count_reorderings(trace: Trace, assignment: dict, pattern: PersistPattern,
                      iterations: int = None) -> AnomalyReport:
    """Count adjacent same-location pairs and classify each against the pattern.

    Pairs the pattern itself prescribes (a token followed by itself) are not
    counted. A pair whose second record falls past the last expected
    iteration is EXTRA; otherwise it is MISSING_OR_SWAPPED for the token
    that was due, reported at the iteration window of the pair's first
    record.
    """
    locs = _locations(trace, assignment)
    tokens = pattern.tokens
    _, per_record = _walk(locs, tokens)
    allowed = _expected_repeats(tokens)
    positions = []
    for i in range(1, len(locs)):
        loc = locs[i]
        if loc != locs[i - 1] or loc in allowed:
            continue
        win, due = per_record[i]
        if iterations is not None and win >= iterations:
            positions.append(Anomaly(win, EXTRA, loc))
        else:
            positions.append(Anomaly(per_record[i - 1][0], MISSING_OR_SWAPPED, due))
    return AnomalyReport(reorderings=len(positions), positions=positions, no_data=not locs)


def deviation(issued: dict, persisted: dict):
    """Normalised unsigned deviation (percent) and per-location signed deviation."""
    extra = set(persisted) - set(issued)
    if extra:
        raise AnalysisError(f"persisted counts for unissued locations: {sorted(extra)}")
    total = Fraction(0)
    signed = {}
    for name, i in issued.items():
        if i <= 0:
            raise AnalysisError(f"issued count for {name} must be positive")
        d = Fraction(persisted.get(name, 0) - i, i) * 100
        signed[name] = d
        total += abs(d)
    return total, signed


def persisted_counts(trace: Trace, assignment: dict) -> dict:
    c = Counter(_locations(trace, assignment))
    return {name: c.get(name, 0) for name in assignment}


def check_post_condition(trace: Trace, assignment: dict, test: LitmusTest) -> Verdicts:
    """Per-iteration verdicts: false iff the window deviates from the pattern."""
    pattern = expected_pattern(test)
    locs = _locations(trace, assignment)
    if not locs:
        return Verdicts([], no_data=True)
    windows, _ = _walk(locs, pattern.tokens)
    return Verdicts([not violated for violated, _ in windows])


def anomaly_distribution(positions, iterations: int, buckets: int,
                         locations=()) -> Histogram:
    if buckets < 1:
        raise ValueError("buckets must be >= 1")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    counts = {}
    for loc in locations:
        for kind in (MISSING_OR_SWAPPED, EXTRA):
            counts[(kind, loc)] = [0] * buckets
    for p in positions:
        b = min(max(p.iteration, 0) * buckets // iterations, buckets - 1)
        counts.setdefault((p.kind, p.location), [0] * buckets)[b] += 1
    return Histogram(buckets, iterations, dict(sorted(counts.items())))


def sequence_reorderings(locations) -> int:
    """Adjacent same-location pairs in a plain sequence (ground-truth audit)."""
    return sum(1 for a, b in zip(locations, locations[1:]) if a == b)


def analyze_trace(trace: Trace, assignment: dict, test: LitmusTest, issued: dict = None
                  ) -> AnomalyReport:
    """Full metrics bundle for a filtered body trace."""
    pattern = expected_pattern(test)
    filtered = filter_trace(trace, assignment.values())
    report = count_reorderings(filtered, assignment, pattern, test.iterations)
    if issued is None:
        per_iter = Counter(pattern.tokens)
        issued = {name: per_iter.get(name, 0) * test.iterations for name in test.names}
        issued = {k: v for k, v in issued.items() if v > 0}
    persisted = persisted_counts(filtered, assignment)
    report.deviation_pct, report.signed_dev = deviation(
        issued, {k: v for k, v in persisted.items() if k in issued})
    v = check_post_condition(filtered, assignment, test)
    report.verdict_per_iteration = v.verdicts
    report.no_data = v.no_data
    return report


def format_pct(x: Fraction, signed: bool = False) -> str:
    """Render to two decimals with exact half-even rounding."""
    hundredths = round(Fraction(x) * 100)
    sign = "-" if hundredths < 0 else ("+" if signed and hundredths > 0 else "")
    q, r = divmod(abs(hundredths), 100)
    return f"{sign}{q}.{r:02d}"
