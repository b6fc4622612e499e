"""Simulated machine-under-test.

A litmus program runs through a dirty-line cache and a persist buffer whose
drain to the memory bus is governed by an architecture profile. The machine
records what the bus probe can see (write commands with geometric
addresses) and, separately, the order in which writes entered the
persistence domain.

Timing model: every executed instruction is one step; after each step the
persist buffer gets one drain opportunity in which each of the oldest
``reorder_window + 1`` entries leaves with probability ``drain_prob``
(oldest first, so same-step departures keep FIFO order). A drained entry
that leaves while other entries are still queued is "contended" and is
written a second time with probability ``spurious_prob``. ``Sleep(d>0)``
empties the buffer in FIFO order. Background traffic is one write to a
random unallocated cacheline with probability ``noise_rate`` per step.

Per-profile semantics:

    X86_WPQ    clflush moves the line into the WPQ synchronously; that is the
               persist point (ground truth). sfence orders nothing further.
               The WPQ drains to the bus lazily, reordered within the window.
    ARM_POP    dc cvap queues the line; dsb sy waits until every queued cvap
               line has reached the bus. The bus is the persist point.
    ARM_NOPOP  no point of persistence: dc cvap and dc cvac share one handler
               (clean to PoC) and dsb sy only waits for acceptance into the
               buffer. Ground truth is undefined.
"""

import enum
from collections import Counter
from dataclasses import dataclass, field, fields, replace

from .addressing import CACHELINE, LINE_SHIFT, GeometricAddress, MappingFunction, map_to_geometric
from .litmus import (Barrier, BarrierKind, LitmusTest, LocationDecl, Persist, PersistKind,
                     Sleep, Write)
from .rng import XorShift64Star


class SimError(RuntimeError):
    pass


class UnsupportedInstruction(SimError):
    pass


class OutOfMemory(SimError):
    pass


class UnknownProfile(KeyError):
    def __str__(self):
        return f"unknown profile {self.args[0]!r}"


class ArchKind(enum.Enum):
    X86_WPQ = "X86_WPQ"
    ARM_POP = "ARM_POP"
    ARM_NOPOP = "ARM_NOPOP"


@dataclass(frozen=True)
class ArchProfile:
    kind: ArchKind
    reorder_window: int = 0
    coalesce_prob: float = 0.0
    spurious_prob: float = 0.0
    noise_rate: float = 0.0
    drain_prob: float = 1.0

    def __post_init__(self):
        if self.reorder_window < 0:
            raise ValueError("reorder_window must be >= 0")
        for name in ("coalesce_prob", "spurious_prob", "noise_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if not 0.0 < self.drain_prob <= 1.0:
            raise ValueError(f"drain_prob={self.drain_prob} outside (0, 1]")

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(f"{f.name}={v.value if isinstance(v, ArchKind) else v}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ArchProfile":
        kw = {}
        known = {f.name for f in fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not eq or key not in known:
                raise ValueError(f"profile line {lineno}: cannot parse {raw!r}")
            if key == "kind":
                kw[key] = ArchKind(val.upper())
            elif key == "reorder_window":
                kw[key] = int(val)
            else:
                kw[key] = float(val)
        if "kind" not in kw:
            raise ValueError("profile needs kind=")
        return cls(**kw)


_DEFAULTS = {
    "arm-pop": ArchProfile(ArchKind.ARM_POP),
    "x86-wpq": ArchProfile(ArchKind.X86_WPQ, reorder_window=8, spurious_prob=0.3,
                           noise_rate=0.01, drain_prob=0.9),
    "arm-nopop": ArchProfile(ArchKind.ARM_NOPOP, reorder_window=1, coalesce_prob=0.5,
                             spurious_prob=0.4, noise_rate=0.01, drain_prob=0.68),
}


def default_profiles() -> dict:
    return dict(_DEFAULTS)


def get_profile(name: str) -> ArchProfile:
    try:
        return _DEFAULTS[name]
    except KeyError:
        raise UnknownProfile(name) from None


def load_profile(name_or_path) -> ArchProfile:
    """Built-in profile by name, otherwise a key=value profile file."""
    if str(name_or_path) in _DEFAULTS:
        return _DEFAULTS[str(name_or_path)]
    try:
        with open(name_or_path, encoding="utf-8") as f:
            return ArchProfile.from_text(f.read())
    except FileNotFoundError:
        raise UnknownProfile(str(name_or_path)) from None


@dataclass
class SimRun:
    bus_events: list
    ground_truth: list
    alloc_map: dict
    issued_counts: dict
    preamble_counts: dict = field(default_factory=dict)
    # first bus index of the most recent body phase
    body_start: int = 0
    # hidden per-event owner (location name or None for background traffic);
    # never visible to the probe, kept for white-box checks
    bus_sources: list = field(default_factory=list)


@dataclass
class _Entry:
    line: int
    location: str
    pop: bool


class Machine:
    """Stateful simulated machine; :func:`run_program` is the one-shot wrapper."""

    def __init__(self, profile: ArchProfile, mapping: MappingFunction, seed: int):
        self.profile = profile
        self.mapping = mapping
        self.rng = XorShift64Star(seed)
        self.cycle = 0
        self.bus = []
        self.sources = []
        self.ground_truth = []
        self.alloc_map = {}
        self.spans = {}
        self.issued = Counter()
        self.preamble_counts = {}
        self.body_start = 0
        self.buffer = []
        self.dirty = {}
        self._allocated_lines = set()
        self._geo_cache = {}
        self._in_body = False
        lines = mapping.memory_size // CACHELINE
        # start somewhere in the lower half so there is room to allocate
        self._cursor = self.rng.below(max(lines // 2, 1)) * CACHELINE

    # -- allocation -----------------------------------------------------

    def allocate(self, decl: LocationDecl) -> int:
        if decl.aligned:
            base = -(-self._cursor // CACHELINE) * CACHELINE
            end = base + -(-decl.size_bytes // CACHELINE) * CACHELINE
        else:
            base = self._cursor
            end = base + decl.size_bytes
        if end > self.mapping.memory_size:
            raise OutOfMemory(f"cannot allocate {decl.size_bytes} bytes for {decl.name}")
        self._cursor = end
        self.alloc_map[decl.name] = base
        self.spans[decl.name] = (base, end)
        self._allocated_lines.update(range(base >> LINE_SHIFT, ((end - 1) >> LINE_SHIFT) + 1))
        return base

    def lines_of(self, name: str):
        base = self.alloc_map[name]
        return range(base >> LINE_SHIFT, ((base + 7) >> LINE_SHIFT) + 1)

    # -- bus ------------------------------------------------------------

    def _geo(self, line: int) -> GeometricAddress:
        g = self._geo_cache.get(line)
        if g is None:
            g = self._geo_cache[line] = map_to_geometric(self.mapping, line << LINE_SHIFT)
        return g

    def _bus_write(self, line: int, source):
        idx = len(self.bus)
        self.bus.append((idx, self._geo(line)))
        self.sources.append(source)
        if source is not None and self._in_body and self.profile.kind is ArchKind.ARM_POP:
            self.ground_truth.append((idx, source))

    def _emit(self, entry: _Entry, contended: bool):
        self._bus_write(entry.line, entry.location)
        if contended and self.rng.chance(self.profile.spurious_prob):
            self._bus_write(entry.line, entry.location)

    def _drain_step(self):
        buf = self.buffer
        if not buf:
            return
        q = self.profile.drain_prob
        window = self.profile.reorder_window
        i = 0
        while i < len(buf) and i <= window:
            if self.rng.chance(q):
                e = buf.pop(i)
                self._emit(e, contended=bool(buf))
            else:
                i += 1

    def _drain_fifo(self, upto: int = None):
        """Emit the oldest entries in order; ``upto`` entries, default all."""
        n = len(self.buffer) if upto is None else upto
        for _ in range(n):
            e = self.buffer.pop(0)
            self._emit(e, contended=bool(self.buffer))

    def _noise_step(self):
        if not self.rng.chance(self.profile.noise_rate):
            return
        total = self.mapping.memory_size // CACHELINE
        if len(self._allocated_lines) >= total:
            return
        while True:
            line = self.rng.below(total)
            if line not in self._allocated_lines:
                break
        self._bus_write(line, None)

    def _step(self, cycles: int = 1):
        self.cycle += cycles
        self._drain_step()
        self._noise_step()

    # -- execution ------------------------------------------------------

    def run_preamble(self, counts: dict):
        """Strict mode: every write is forced straight to the bus."""
        self._in_body = False
        for name, count in counts.items():
            if count < 1:
                raise SimError(f"preamble count for {name} must be positive")
            if name not in self.alloc_map:
                raise SimError(f"preamble location {name} is not allocated")
            for _ in range(count):
                for line in self.lines_of(name):
                    self._bus_write(line, name)
                self._step()
            self.preamble_counts[name] = count

    def _check(self, ins):
        kind = self.profile.kind
        if isinstance(ins, Persist):
            ok = (ins.kind is PersistKind.CLFLUSH) == (kind is ArchKind.X86_WPQ)
        elif isinstance(ins, Barrier):
            ok = (ins.kind is BarrierKind.SFENCE) == (kind is ArchKind.X86_WPQ)
        else:
            return
        if not ok:
            raise UnsupportedInstruction(f"{ins.kind.value} is not available on {kind.value}")

    def _execute(self, ins, iteration: int):
        kind = self.profile.kind
        if isinstance(ins, Write):
            self.issued[ins.location] += 1
            for line in self.lines_of(ins.location):
                self.dirty[line] = ins.location
            self._step()
        elif isinstance(ins, Persist):
            for line in self.lines_of(ins.location):
                if self.dirty.pop(line, None) is None:
                    continue
                if kind is ArchKind.X86_WPQ:
                    self.ground_truth.append((self.cycle, ins.location))
                if (self.profile.coalesce_prob
                        and any(e.line == line for e in self.buffer)
                        and self.rng.chance(self.profile.coalesce_prob)):
                    continue
                pop = kind is ArchKind.ARM_POP and ins.kind is PersistKind.CVAP
                self.buffer.append(_Entry(line, ins.location, pop))
            self._step()
        elif isinstance(ins, Barrier):
            if kind is ArchKind.ARM_POP:
                last = max((i for i, e in enumerate(self.buffer) if e.pop), default=-1)
                self._drain_fifo(last + 1)
            self._step()
        elif isinstance(ins, Sleep):
            if ins.duration > 0:
                self._drain_fifo()
            self._step(ins.duration)

    def run_body(self, test: LitmusTest):
        for body in test.threads:
            for ins in body:
                self._check(ins)
        self._in_body = True
        self.body_start = len(self.bus)
        self.issued = Counter({name: 0 for name in test.names})
        threads = test.threads
        for it in range(test.iterations):
            if len(threads) == 1:
                for ins in threads[0]:
                    self._execute(ins, it)
            else:
                # round-robin interleaving, one instruction per thread in turn
                longest = max(len(t) for t in threads)
                for k in range(longest):
                    for t in threads:
                        if k < len(t):
                            self._execute(t[k], it)
        # pending lines eventually reach memory once the program exits
        self._drain_fifo()
        self._in_body = False

    def result(self) -> SimRun:
        return SimRun(bus_events=list(self.bus), ground_truth=list(self.ground_truth),
                      alloc_map=dict(self.alloc_map), issued_counts=dict(self.issued),
                      preamble_counts=dict(self.preamble_counts), body_start=self.body_start,
                      bus_sources=list(self.sources))


def allocate(sim: Machine, decl: LocationDecl) -> int:
    return sim.allocate(decl)


def run_program(profile: ArchProfile, mapping: MappingFunction, test: LitmusTest,
                preamble: dict, seed: int) -> SimRun:
    m = Machine(profile, mapping, seed)
    for d in test.locations:
        m.allocate(d)
    m.run_preamble(preamble)
    m.run_body(test)
    return m.result()


def with_params(profile: ArchProfile, **changes) -> ArchProfile:
    return replace(profile, **changes)
