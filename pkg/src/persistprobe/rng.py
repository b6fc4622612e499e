"""Seeded 64-bit generator shared by every stochastic part of the simulator.

The stream is fully specified so that other implementations can reproduce it
bit for bit:

    seeding (splitmix64 of the user seed):
        z = (seed + 0x9E3779B97F4A7C15) mod 2**64
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
        state = z ^ (z >> 31)        (replaced by 1 if it comes out 0)

    step (xorshift64*):
        state ^= state >> 12
        state ^= state << 25 (mod 2**64)
        state ^= state >> 27
        output = state * 0x2545F4914F6CDD1D mod 2**64

    random() = (output >> 11) * 2**-53
    below(n) = output mod n
"""

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = splitmix64(seed & MASK64) or 1

    def next_u64(self) -> int:
        s = self.state
        s ^= s >> 12
        s ^= (s << 25) & MASK64
        s ^= s >> 27
        self.state = s
        return (s * 0x2545F4914F6CDD1D) & MASK64

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def chance(self, p: float) -> bool:
        """Bernoulli draw; consumes no state when p is 0 or 1."""
        if p <= 0.0:
            return False
        if p >= 1.0:
            return True
        return self.random() < p

    def sample(self, population, k: int) -> list:
        pool = list(population)
        out = []
        for _ in range(k):
            out.append(pool.pop(self.below(len(pool))))
        return out
