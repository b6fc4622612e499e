"""Persistency litmus tests: data model, text format, expected persist pattern.

File grammar (line oriented, ``#`` starts a comment)::

    file        := line*
    line        := "iterations" "=" INT
                 | "[locations]" | "[thread" INT "]" | "[post]"
                 | location | instruction | implication
    location    := NAME "size=" INT "ratio=" INT ["aligned=" ("yes"|"no")]
    instruction := "write" NAME (INT | "counter")
                 | "persist" ("clflush"|"cvap"|"cvac") NAME
                 | "barrier" ("dsb_sy"|"sfence")
                 | "sleep" INT                      # simulated ns
    implication := NAME "==" INT "->" NAME "==" INT

Threads must be numbered 0, 1, ... in file order. The preamble is not part
of the file; it is derived from the location ratios.
"""

import enum
import re
from dataclasses import dataclass, field
from typing import Union

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_IMPL = re.compile(r"\s*([A-Za-z_]\w*)\s*==\s*(\S+)\s*->\s*([A-Za-z_]\w*)\s*==\s*(\S+)\s*\Z")

COUNTER = "counter"
U64_MAX = (1 << 64) - 1


class LitmusError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnsupportedShape(ValueError):
    """The alternation oracle does not apply to this test."""


class PersistKind(enum.Enum):
    CLFLUSH = "clflush"
    CVAP = "cvap"
    CVAC = "cvac"


class BarrierKind(enum.Enum):
    DSB_SY = "dsb_sy"
    SFENCE = "sfence"


@dataclass(frozen=True)
class LocationDecl:
    name: str
    size_bytes: int
    ratio: int
    aligned: bool = True


@dataclass(frozen=True)
class Write:
    location: str
    value: Union[int, str]

    def value_at(self, iteration: int) -> int:
        return iteration if self.value == COUNTER else self.value


@dataclass(frozen=True)
class Persist:
    location: str
    kind: PersistKind


@dataclass(frozen=True)
class Barrier:
    kind: BarrierKind


@dataclass(frozen=True)
class Sleep:
    duration: int


Instruction = Union[Write, Persist, Barrier, Sleep]


@dataclass(frozen=True)
class Implication:
    if_location: str
    if_value: int
    then_location: str
    then_value: int

    def __str__(self):
        return f"{self.if_location}=={self.if_value} -> {self.then_location}=={self.then_value}"


@dataclass(frozen=True)
class PostCondition:
    implications: tuple = ()


@dataclass(frozen=True)
class LitmusTest:
    locations: tuple
    threads: tuple
    iterations: int
    post_condition: PostCondition = field(default_factory=PostCondition)

    def __post_init__(self):
        validate(self.locations, self.threads, self.iterations, self.post_condition)

    def location(self, name: str) -> LocationDecl:
        for d in self.locations:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def names(self):
        return [d.name for d in self.locations]


@dataclass(frozen=True)
class PersistPattern:
    tokens: tuple

    def __len__(self):
        return len(self.tokens)


def validate(locations, threads, iterations, post_condition, lines=None) -> None:
    """Raise LitmusError on any invariant violation; ``lines`` maps objects to line numbers."""
    lines = lines or {}

    def where(obj):
        return lines.get(id(obj))

    if iterations < 1:
        raise LitmusError("iterations must be >= 1 (zero iterations)", lines.get("iterations"))
    declared = set()
    ratios = {}
    for d in locations:
        if d.name in declared:
            raise LitmusError(f"duplicate location {d.name}", where(d))
        if d.size_bytes < 1:
            raise LitmusError(f"location {d.name}: size must be positive", where(d))
        if d.ratio < 1:
            raise LitmusError(f"location {d.name}: ratio must be positive", where(d))
        if d.ratio in ratios:
            raise LitmusError(f"duplicate preamble ratio {d.ratio} ({ratios[d.ratio]}, {d.name})",
                              where(d))
        declared.add(d.name)
        ratios[d.ratio] = d.name
    if not threads:
        raise LitmusError("test needs at least one thread")
    writes = 0
    for body in threads:
        for ins in body:
            loc = getattr(ins, "location", None)
            if loc is not None and loc not in declared:
                raise LitmusError(f"undeclared location {loc}", where(ins))
            if isinstance(ins, Write):
                writes += 1
                if ins.value != COUNTER and not 0 <= ins.value <= U64_MAX:
                    raise LitmusError(f"write value {ins.value} is not a 64-bit integer", where(ins))
            if isinstance(ins, Sleep) and ins.duration < 0:
                raise LitmusError("sleep duration must be non-negative", where(ins))
    if writes == 0:
        raise LitmusError("test needs at least one write instruction")
    for imp in post_condition.implications:
        for loc in (imp.if_location, imp.then_location):
            if loc not in declared:
                raise LitmusError(f"undeclared location {loc}", where(imp))


def _int(tok, lineno, what):
    try:
        return int(tok, 0)
    except ValueError:
        raise LitmusError(f"expected integer for {what}, got {tok!r}", lineno) from None


def _parse_location(tokens, lineno):
    name = tokens[0]
    if not _NAME.match(name):
        raise LitmusError(f"invalid location name {name!r}", lineno)
    opts = {}
    for tok in tokens[1:]:
        key, eq, val = tok.partition("=")
        if not eq or key not in ("size", "ratio", "aligned"):
            raise LitmusError(f"unknown location attribute {tok!r}", lineno)
        opts[key] = val
    if "size" not in opts or "ratio" not in opts:
        raise LitmusError(f"location {name} needs size= and ratio=", lineno)
    aligned = opts.get("aligned", "yes")
    if aligned not in ("yes", "no"):
        raise LitmusError("aligned must be yes or no", lineno)
    return LocationDecl(name, _int(opts["size"], lineno, "size"),
                        _int(opts["ratio"], lineno, "ratio"), aligned == "yes")


def _parse_instruction(tokens, lineno):
    op, args = tokens[0], tokens[1:]
    try:
        if op == "write" and len(args) == 2:
            value = COUNTER if args[1] == COUNTER else _int(args[1], lineno, "write value")
            return Write(args[0], value)
        if op == "persist" and len(args) == 2:
            return Persist(args[1], PersistKind(args[0]))
        if op == "barrier" and len(args) == 1:
            return Barrier(BarrierKind(args[0]))
        if op == "sleep" and len(args) == 1:
            return Sleep(_int(args[0], lineno, "sleep duration"))
    except ValueError as e:
        if isinstance(e, LitmusError):
            raise
        raise LitmusError(f"unknown kind in {' '.join(tokens)!r}", lineno) from None
    raise LitmusError(f"syntax error: {' '.join(tokens)!r}", lineno)


def parse_litmus(text: str) -> LitmusTest:
    section = None
    iterations = None
    locations = []
    threads = []
    implications = []
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            m = re.fullmatch(r"\[\s*(locations|post|thread\s+(\d+))\s*\]", line)
            if not m:
                raise LitmusError(f"unknown section {line}", lineno)
            if m.group(2) is not None:
                idx = int(m.group(2))
                if idx != len(threads):
                    raise LitmusError(f"expected [thread {len(threads)}], got {line}", lineno)
                threads.append([])
                section = "thread"
            else:
                section = m.group(1)
            continue
        m = re.fullmatch(r"iterations\s*=\s*(\S+)", line)
        if m:
            iterations = _int(m.group(1), lineno, "iterations")
            lines["iterations"] = lineno
            continue
        if section == "locations":
            obj = _parse_location(line.split(), lineno)
            locations.append(obj)
        elif section == "thread":
            obj = _parse_instruction(line.split(), lineno)
            threads[-1].append(obj)
        elif section == "post":
            m = _IMPL.match(line)
            if not m:
                raise LitmusError(f"syntax error in implication: {line!r}", lineno)
            obj = Implication(m.group(1), _int(m.group(2), lineno, "value"),
                              m.group(3), _int(m.group(4), lineno, "value"))
            implications.append(obj)
        else:
            raise LitmusError(f"statement outside any section: {line!r}", lineno)
        lines[id(obj)] = lineno
    if iterations is None:
        raise LitmusError("missing 'iterations = N'")
    post = PostCondition(tuple(implications))
    validate(locations, threads, iterations, post, lines)
    return LitmusTest(tuple(locations), tuple(tuple(t) for t in threads), iterations, post)


def render_instruction(ins: Instruction) -> str:
    if isinstance(ins, Write):
        return f"write {ins.location} {ins.value}"
    if isinstance(ins, Persist):
        return f"persist {ins.kind.value} {ins.location}"
    if isinstance(ins, Barrier):
        return f"barrier {ins.kind.value}"
    return f"sleep {ins.duration}"


def render_litmus(test: LitmusTest) -> str:
    out = [f"iterations = {test.iterations}", "[locations]"]
    for d in test.locations:
        s = f"{d.name} size={d.size_bytes} ratio={d.ratio}"
        if not d.aligned:
            s += " aligned=no"
        out.append(s)
    for i, body in enumerate(test.threads):
        out.append(f"[thread {i}]")
        out.extend(render_instruction(ins) for ins in body)
    if test.post_condition.implications:
        out.append("[post]")
        out.extend(str(imp) for imp in test.post_condition.implications)
    return "\n".join(out) + "\n"


def load_litmus(path) -> LitmusTest:
    with open(path, encoding="utf-8") as f:
        return parse_litmus(f.read())


def expected_pattern(test: LitmusTest) -> PersistPattern:
    """Program-order tokens of persist-separated writes in one iteration.

    Each write must be covered by a persist of its location and a later
    barrier before the next write (including the wrap-around into the next
    iteration).
    """
    if len(test.threads) != 1:
        raise UnsupportedShape(f"multi-threaded test ({len(test.threads)} threads): "
                               "alternation oracle only covers a single thread")
    tokens = []
    pending = None
    state = None
    for ins in test.threads[0]:
        if isinstance(ins, Write):
            if pending is not None and state != "fenced":
                raise UnsupportedShape(f"write to {ins.location} not persist-separated "
                                       f"from preceding write to {pending}")
            pending, state = ins.location, "written"
            tokens.append(ins.location)
        elif isinstance(ins, Persist):
            if ins.location == pending and state == "written":
                state = "persisted"
        elif isinstance(ins, Barrier):
            if state == "persisted":
                state = "fenced"
    if state != "fenced":
        raise UnsupportedShape(f"final write to {pending} not persist-separated "
                               "from the next iteration")
    return PersistPattern(tuple(tokens))
