"""Physical and geometric DRAM addresses, GF(2)-linear mappings, wildcard masks.

A geometric address is packed into 32 bits as bank_group|bank|row|column,
most significant field first:

    bit 31..30  bank group (2 bits)
    bit 29..28  bank       (2 bits)
    bit 27..10  row        (18 bits)
    bit  9..0   column     (10 bits)
"""

from dataclasses import dataclass

from .rng import XorShift64Star

CACHELINE = 64
LINE_SHIFT = 6
GEO_BITS = 32

BANK_GROUP_BITS = 2
BANK_BITS = 2
ROW_BITS = 18
COLUMN_BITS = 10

_COL_SHIFT = 0
_ROW_SHIFT = COLUMN_BITS
_BANK_SHIFT = COLUMN_BITS + ROW_BITS
_BG_SHIFT = COLUMN_BITS + ROW_BITS + BANK_BITS


class AddressError(ValueError):
    pass


def cacheline_of(pa: int) -> int:
    return pa >> LINE_SHIFT


@dataclass(frozen=True, order=True)
class GeometricAddress:
    bank_group: int
    bank: int
    row: int
    column: int

    def __post_init__(self):
        for name, width in (("bank_group", BANK_GROUP_BITS), ("bank", BANK_BITS),
                            ("row", ROW_BITS), ("column", COLUMN_BITS)):
            v = getattr(self, name)
            if not 0 <= v < (1 << width):
                raise AddressError(f"{name}={v} outside {width}-bit range")

    @property
    def packed(self) -> int:
        return ((self.bank_group << _BG_SHIFT) | (self.bank << _BANK_SHIFT)
                | (self.row << _ROW_SHIFT) | self.column)

    @classmethod
    def from_packed(cls, value: int) -> "GeometricAddress":
        if not 0 <= value < (1 << GEO_BITS):
            raise AddressError(f"packed geometric address {value:#x} exceeds 32 bits")
        return cls((value >> _BG_SHIFT) & 0x3, (value >> _BANK_SHIFT) & 0x3,
                   (value >> _ROW_SHIFT) & ((1 << ROW_BITS) - 1),
                   value & ((1 << COLUMN_BITS) - 1))

    def bits(self) -> str:
        return format(self.packed, "032b")

    def __str__(self):
        return f"bg{self.bank_group}.b{self.bank}.r{self.row}.c{self.column}"


@dataclass(frozen=True)
class MappingFunction:
    """Physical -> geometric map, one XOR set per geometric output bit.

    ``taps[j]`` lists the physical-address bit indices whose parity gives
    packed geometric bit ``j`` (bit 0 = column LSB); ``constants`` is a
    32-bit word XORed onto the result. Only bits 6 and above may be tapped.
    """

    taps: tuple
    constants: int
    memory_bits: int

    def __post_init__(self):
        if len(self.taps) != GEO_BITS:
            raise AddressError(f"mapping needs {GEO_BITS} output bits, got {len(self.taps)}")
        if not LINE_SHIFT < self.memory_bits <= LINE_SHIFT + GEO_BITS:
            raise AddressError(f"memory_bits={self.memory_bits} cannot fit 32 geometric bits")
        for t in self.taps:
            for b in t:
                if not LINE_SHIFT <= b < self.memory_bits:
                    raise AddressError(f"tap bit {b} outside [6, {self.memory_bits})")
        object.__setattr__(self, "_masks", tuple(sum(1 << b for b in t) for t in self.taps))

    @property
    def memory_size(self) -> int:
        return 1 << self.memory_bits

    def apply_raw(self, pa: int) -> int:
        out = self.constants
        for j, m in enumerate(self._masks):
            if (pa & m).bit_count() & 1:
                out ^= 1 << j
        return out

    def serialize(self) -> str:
        """One line per output bit: ``<bit>: <tap> <tap> ... [^1]``."""
        lines = [f"memory_bits={self.memory_bits}"]
        for j, t in enumerate(self.taps):
            s = " ".join(str(b) for b in sorted(t))
            if (self.constants >> j) & 1:
                s += " ^1"
            lines.append(f"{j}: {s}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "MappingFunction":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("memory_bits="):
            raise AddressError("mapping text must start with memory_bits=")
        memory_bits = int(lines[0].split("=", 1)[1])
        taps = [None] * GEO_BITS
        constants = 0
        for ln in lines[1:]:
            head, _, rest = ln.partition(":")
            j = int(head)
            bits = []
            for tok in rest.split():
                if tok == "^1":
                    constants |= 1 << j
                else:
                    bits.append(int(tok))
            taps[j] = frozenset(bits)
        if any(t is None for t in taps):
            raise AddressError("mapping text is missing output bits")
        return cls(tuple(taps), constants, memory_bits)


def identity_mapping(memory_bits: int = LINE_SHIFT + GEO_BITS) -> MappingFunction:
    """Geometric bit i is physical bit i+6; unused outputs stay 0."""
    cl_bits = memory_bits - LINE_SHIFT
    taps = tuple(frozenset([i + LINE_SHIFT]) if i < cl_bits else frozenset()
                 for i in range(GEO_BITS))
    return MappingFunction(taps, 0, memory_bits)


def random_mapping(seed: int, memory_bits: int = 30) -> MappingFunction:
    """Seeded injective GF(2)-linear mapping over ``2**memory_bits`` bytes.

    Each cacheline-index bit i is placed at a distinct random output position
    and XOR-folded with a random subset of the more significant index bits,
    which makes the matrix a permuted unit-triangular one and hence
    invertible. Output positions not claimed by any input bit become random
    sparse random parities of the inputs.
    """
    if not LINE_SHIFT < memory_bits <= LINE_SHIFT + GEO_BITS:
        raise AddressError(f"memory_bits={memory_bits} cannot fit 32 geometric bits")
    rng = XorShift64Star(seed)
    n = memory_bits - LINE_SHIFT
    positions = rng.sample(range(GEO_BITS), n)
    taps = [frozenset()] * GEO_BITS
    for i, pos in enumerate(positions):
        fold = [k for k in range(i + 1, n) if rng.below(2) == 0]
        taps[pos] = frozenset([i + LINE_SHIFT] + [k + LINE_SHIFT for k in fold])
    for pos in range(GEO_BITS):
        if pos not in positions:
            taps[pos] = frozenset(k + LINE_SHIFT for k in range(n) if rng.below(8) == 0)
    constants = rng.next_u64() & ((1 << GEO_BITS) - 1)
    return MappingFunction(tuple(taps), constants, memory_bits)


def map_to_geometric(m: MappingFunction, pa: int) -> GeometricAddress:
    if not 0 <= pa < m.memory_size:
        raise AddressError(f"physical address {pa:#x} outside simulated range "
                           f"[0, {m.memory_size:#x})")
    return GeometricAddress.from_packed(m.apply_raw(pa))


@dataclass(frozen=True)
class WildcardMask:
    """Bit pattern over {0,1,X}; ``care`` marks fixed bits, ``value`` their level."""

    care: int
    value: int
    width: int = GEO_BITS

    def __post_init__(self):
        full = (1 << self.width) - 1
        if self.care & ~full or self.value & ~self.care:
            raise AddressError("mask value bits must lie within the care bits")

    def __str__(self):
        out = []
        for i in reversed(range(self.width)):
            if (self.care >> i) & 1:
                out.append("1" if (self.value >> i) & 1 else "0")
            else:
                out.append("X")
        return "".join(out)

    @classmethod
    def parse(cls, text: str) -> "WildcardMask":
        text = text.strip()
        care = value = 0
        for ch in text:
            care <<= 1
            value <<= 1
            if ch == "1":
                care |= 1
                value |= 1
            elif ch == "0":
                care |= 1
            elif ch not in "Xx":
                raise AddressError(f"invalid mask symbol {ch!r}")
        return cls(care, value, len(text))

    @classmethod
    def all_x(cls, width: int = GEO_BITS) -> "WildcardMask":
        return cls(0, 0, width)

    @property
    def fixed_bits(self) -> int:
        return self.care.bit_count()

    def matches_raw(self, packed: int) -> bool:
        return (packed & self.care) == self.value


def _packed(a) -> int:
    return a.packed if isinstance(a, GeometricAddress) else int(a)


def compute_wildcard_mask(addrs, width: int = GEO_BITS) -> WildcardMask:
    """Most specific mask matching every address in ``addrs``.

    Accepts GeometricAddress values or raw ints (for toy widths).
    """
    vals = [_packed(a) for a in addrs]
    if not vals:
        raise AddressError("cannot compute a wildcard mask for an empty address set")
    full = (1 << width) - 1
    ones = full
    zeros = full
    for v in vals:
        ones &= v
        zeros &= ~v
    care = (ones | zeros) & full
    return WildcardMask(care, ones & care, width)


def mask_matches(mask: WildcardMask, ga) -> bool:
    return mask.matches_raw(_packed(ga))
