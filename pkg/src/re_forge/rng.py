"""SplitMix64, the seeded generator behind every random selection.

SplitMix64 (Steele, Lea & Flood 2014; public-domain C reference by
S. Vigna) is chosen because it is tiny, has no hidden state beyond one
64-bit word, and is easy to reproduce in any language.  Reference vector:
seed 1234567 yields 6457827717110365317, 3203168211198807973,
9817491932198370423, 4593380528125082431, 16408922859458223821.

Stream layout, so other implementations can match selections exactly:

* each operation (one downsample, one split) starts a fresh generator from
  the user seed;
* ``below(n)`` draws 64-bit words and rejects any word
  ``>= 2**64 - (2**64 mod n)``, then returns ``word mod n``;
* ``sample(n, k)`` is a forward partial Fisher-Yates over ``range(n)``: for
  ``i`` in ``0..k-1`` swap position ``i`` with ``i + below(n - i)``; the
  first ``k`` positions are the sample;
* ``shuffle`` is the full forward variant (``k = n``).
"""

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def sample(self, n: int, k: int) -> list:
        """``k`` distinct indices from ``range(n)`` in selection order."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def shuffle(self, items: list) -> list:
        order = self.sample(len(items), len(items))
        return [items[i] for i in order]
