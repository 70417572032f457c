"""Seeded bounded-independence randomness.

Everything random in this package flows from a single master seed through
the generators below:

* ``KWiseBits`` -- k-wise independent bits from a degree-(k-1) polynomial
  over GF(2^r), r = ceil(log2 m) + 1.  For any set of at most k distinct
  indices the joint bit distribution over the seed is exactly uniform.
* ``KWiseValues`` -- same construction, returning full w-bit values.
* ``RandomOrdering`` -- rank function r : [n] -> [2^w] with w = ceil(3 log2 n)
  built on KWiseValues; ties broken by vertex ID, so the projection onto
  permutations is total.
* biased bits -- a 1/q coin realised as "w-bit block value < round(2^w/q)"
  with w = ceil(log2 q) + 16, so the realised bias is within 2^-16 * (1/q)
  of the target.  Exact 1/q coins are impossible with finitely many fair
  bits for non-dyadic q.

Field arithmetic uses, for each width r, the lexicographically smallest
irreducible polynomial of degree r over GF(2) with constant term 1.  The
rule is deterministic, so runs are bit-exact across platforms; the table
for small r is printed by ``modulus_table()`` and documented in the README.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

# ---------------------------------------------------------------------------
# GF(2)[x] / GF(2^r) arithmetic.  Polynomials are ints, bit t = coeff of x^t.

_MODULUS_CACHE: dict[int, int] = {}


def _poly_mulmod(a: int, b: int, f: int) -> int:
    """(a * b) mod f over GF(2)[x]."""
    deg = f.bit_length() - 1
    res = 0
    while b:
        if b & 1:
            res ^= a
        b >>= 1
        a <<= 1
        if a >> deg & 1:
            a ^= f
    return res


def _poly_powmod_x(e: int, f: int) -> int:
    """x^(2^e) mod f via repeated squaring of x."""
    acc = 2  # the polynomial x
    for _ in range(e):
        acc = _poly_mulmod(acc, acc, f)
    return acc


def _poly_gcd(a: int, b: int) -> int:
    while b:
        if a.bit_length() < b.bit_length():
            a, b = b, a
        shift = a.bit_length() - b.bit_length()
        a ^= b << shift
        if a == 0:
            return b
    return a


def _prime_factors(n: int) -> list[int]:
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def _is_irreducible(f: int) -> bool:
    """Rabin's irreducibility test for a binary polynomial f."""
    r = f.bit_length() - 1
    if r <= 0:
        return False
    if _poly_powmod_x(r, f) != 2:  # x^(2^r) == x (mod f)
        return False
    for q in _prime_factors(r):
        h = _poly_powmod_x(r // q, f) ^ 2
        if _poly_gcd(h, f) != 1:
            return False
    return True


def modulus_polynomial(r: int) -> int:
    """Smallest irreducible degree-r polynomial over GF(2) with constant 1."""
    if r < 1:
        raise UsageError(f"field width must be >= 1, got {r}")
    cached = _MODULUS_CACHE.get(r)
    if cached is not None:
        return cached
    if r == 1:
        _MODULUS_CACHE[1] = 0b11  # x + 1
        return 0b11
    for cand in range((1 << r) + 1, 1 << (r + 1), 2):
        if _is_irreducible(cand):
            _MODULUS_CACHE[r] = cand
            return cand
    raise AssertionError("unreachable: irreducible polynomials exist for every degree")


def modulus_table(max_r: int = 16) -> dict[int, int]:
    """The published modulus list (width -> polynomial, as an int bitmask)."""
    return {r: modulus_polynomial(r) for r in range(1, max_r + 1)}


def gf_mult(a: int, b: int, r: int, poly: int) -> int:
    """Multiply in GF(2^r) with the given reduction polynomial."""
    mask = (1 << r) - 1
    red = poly & mask
    res = 0
    while b:
        if b & 1:
            res ^= a
        b >>= 1
        if a >> (r - 1) & 1:
            a = ((a << 1) & mask) ^ red
        else:
            a = (a << 1) & mask
    return res


def gf_eval(coeffs: list[int], x: int, r: int, poly: int) -> int:
    """Evaluate c_0 + c_1 x + ... + c_{k-1} x^{k-1} in GF(2^r) (Horner)."""
    acc = 0
    for c in reversed(coeffs):
        acc = gf_mult(acc, x, r, poly) ^ c
    return acc


def gf_eval_batch(coeffs: list[int], points: np.ndarray, r: int, poly: int) -> np.ndarray:
    """Vectorised twin of :func:`gf_eval` for r <= 63 (uint64 lanes)."""
    if r > 63:
        return np.array([gf_eval(coeffs, int(x), r, poly) for x in points], dtype=object)
    mask = np.uint64((1 << r) - 1)
    red = np.uint64(poly & ((1 << r) - 1))
    one = np.uint64(1)
    top = np.uint64(r - 1)
    acc = np.zeros(points.shape, dtype=np.uint64)
    pts = points.astype(np.uint64)
    for c in reversed(coeffs):
        # acc = acc * x  (Russian-peasant over the r bits of x)
        a = acc
        b = pts.copy()
        res = np.zeros_like(acc)
        for _ in range(r):
            res ^= a * (b & one)
            b >>= one
            carry = (a >> top) & one
            a = ((a << one) & mask) ^ (red * carry)
        acc = res ^ np.uint64(c)
    return acc


def ceil_log2(m: int) -> int:
    """ceil(log2 m) for m >= 1."""
    if m < 1:
        raise UsageError(f"ceil_log2 needs m >= 1, got {m}")
    return (m - 1).bit_length()


# ---------------------------------------------------------------------------
# Seed handling.


@dataclass
class SeedAudit:
    """Per-generator record of raw seed bits drawn from the master."""

    entries: list[tuple[str, int]] = field(default_factory=list)

    def record(self, label: str, bits: int) -> None:
        self.entries.append((label, bits))

    def total_bits(self) -> int:
        return sum(b for _, b in self.entries)

    def as_rows(self) -> list[dict]:
        return [{"generator": lbl, "bits": b} for lbl, b in self.entries]


class SeedStream:
    """Deterministic bit stream: SHA-256(master || '/' || tag || '/' || ctr)."""

    def __init__(self, master: bytes, tag: str):
        self._master = master
        self._tag = tag.encode()
        self._counter = 0
        self._buf = 0
        self._buf_bits = 0
        self.bits_consumed = 0

    def _refill(self) -> None:
        h = hashlib.sha256(
            self._master + b"/" + self._tag + b"/" + self._counter.to_bytes(8, "big")
        ).digest()
        self._counter += 1
        self._buf = (self._buf << 256) | int.from_bytes(h, "big")
        self._buf_bits += 256

    def take_bits(self, nbits: int) -> int:
        """Next nbits as a big-endian integer."""
        if nbits < 0:
            raise UsageError("cannot take a negative number of bits")
        while self._buf_bits < nbits:
            self._refill()
        self._buf_bits -= nbits
        out = self._buf >> self._buf_bits
        self._buf &= (1 << self._buf_bits) - 1
        self.bits_consumed += nbits
        return out


class SeedBundle:
    """Master random seed plus domain-separated sub-seed streams.

    The master is a hex string of up to 64 digits (256 bits).  Sub-seeds are
    derived by counter-mode SHA-256 with tags such as "bits", "ordering:3",
    "sample"; equal masters agree on every derived value.
    """

    def __init__(self, master_hex: str):
        master_hex = master_hex.strip().lower().removeprefix("0x")
        if not master_hex:
            raise UsageError("master seed must be a non-empty hex string")
        try:
            value = int(master_hex, 16)
        except ValueError as exc:
            raise UsageError(f"master seed is not valid hex: {master_hex!r}") from exc
        if value.bit_length() > 256:
            raise UsageError("master seed must fit in 256 bits")
        self.master_hex = f"{value:064x}"
        self._master = value.to_bytes(32, "big")
        self.audit = SeedAudit()

    @classmethod
    def from_int(cls, value: int) -> "SeedBundle":
        return cls(f"{value:x}")

    def stream(self, tag: str) -> SeedStream:
        return SeedStream(self._master, tag)

    def numpy_rng(self, tag: str) -> np.random.Generator:
        """A PCG64 generator keyed by a 128-bit sub-seed (sampling only)."""
        s = self.stream(tag)
        key = s.take_bits(128)
        self.audit.record(f"{tag} (prng key)", 128)
        return np.random.default_rng(key)


# ---------------------------------------------------------------------------
# k-wise independent bits and values.


class KWiseBits:
    """k-wise independent bits x_1..x_m, seed length k*r with r = ceil(log2 m)+1.

    bit(i) is the low bit of the seed polynomial evaluated at the field
    element i; distinct indices are distinct evaluation points, so any k of
    them are jointly uniform.
    """

    def __init__(self, k: int, m: int, stream: SeedStream, bundle: SeedBundle | None = None):
        if k < 1 or m < 1:
            raise UsageError(f"need k >= 1 and m >= 1, got k={k} m={m}")
        self.k = k
        self.m = m
        self.r = ceil_log2(m) + 1
        self.poly = modulus_polynomial(self.r)
        self.coeffs = [stream.take_bits(self.r) for _ in range(k)]
        self.seed_bits = k * self.r
        if bundle is not None:
            bundle.audit.record(f"bits k={k} m={m}", self.seed_bits)

    @classmethod
    def from_coefficients(cls, k: int, m: int, coeffs: list[int]) -> "KWiseBits":
        obj = cls.__new__(cls)
        obj.k = k
        obj.m = m
        obj.r = ceil_log2(m) + 1
        obj.poly = modulus_polynomial(obj.r)
        if len(coeffs) != k:
            raise UsageError(f"expected {k} coefficients, got {len(coeffs)}")
        obj.coeffs = [c & ((1 << obj.r) - 1) for c in coeffs]
        obj.seed_bits = k * obj.r
        return obj

    def bit(self, index: int) -> int:
        if not 1 <= index <= self.m:
            raise UsageError(f"bit index {index} out of range [1, {self.m}]")
        return gf_eval(self.coeffs, index, self.r, self.poly) & 1

    def bits_batch(self, indices: np.ndarray) -> np.ndarray:
        vals = gf_eval_batch(self.coeffs, indices, self.r, self.poly)
        if vals.dtype == object:
            return np.array([int(v) & 1 for v in vals], dtype=np.uint64)
        return vals & np.uint64(1)


class KWiseValues:
    """k-wise independent width-bit values over indices 1..domain.

    Uses field width r = width directly, which requires 2^width > domain so
    the indices embed as distinct field points.
    """

    def __init__(self, k: int, domain: int, width: int, stream: SeedStream | None,
                 coeffs: list[int] | None = None):
        if k < 1 or domain < 1:
            raise UsageError(f"need k >= 1 and domain >= 1, got k={k} domain={domain}")
        if (1 << width) <= domain:
            raise UsageError(f"width {width} too small for domain {domain}")
        self.k = k
        self.domain = domain
        self.width = width
        self.poly = modulus_polynomial(width)
        if coeffs is not None:
            if len(coeffs) != k:
                raise UsageError(f"expected {k} coefficients, got {len(coeffs)}")
            self.coeffs = [c & ((1 << width) - 1) for c in coeffs]
        else:
            self.coeffs = [stream.take_bits(width) for _ in range(k)]
        self.seed_bits = k * width

    def value(self, index: int) -> int:
        if not 1 <= index <= self.domain:
            raise UsageError(f"value index {index} out of range [1, {self.domain}]")
        return gf_eval(self.coeffs, index, self.width, self.poly)

    def values_batch(self, indices: np.ndarray) -> np.ndarray:
        return gf_eval_batch(self.coeffs, indices, self.width, self.poly)


# ---------------------------------------------------------------------------
# Random orderings.


def ordering_width(n: int) -> int:
    """Rank width ceil(3 log2 n) (one rank value spans [n^3])."""
    if n < 1:
        raise UsageError(f"ordering domain must be >= 1, got {n}")
    if n == 1:
        return 1
    return ceil_log2(n ** 3)


class RandomOrdering:
    """Almost k-wise independent random ordering of [n].

    Ranks are k-wise independent values in [2^w], w = ceil(3 log2 n); the
    comparator key is (rank(v), v), so raw-rank collisions (probability
    <= 2^-w per fixed pair) are broken by vertex ID and the induced order is
    always total.  For any fixed set of at most k elements, the relative
    order depends only on their ranks.
    """

    def __init__(self, n: int, k: int, stream: SeedStream | None, width: int | None = None,
                 coeffs: list[int] | None = None, bundle: SeedBundle | None = None):
        self.n = n
        self.k = k
        self.width = ordering_width(n) if width is None else width
        self._gen = KWiseValues(k, n, self.width, stream, coeffs=coeffs)
        self.seed_bits = self._gen.seed_bits
        self._table: np.ndarray | None = None
        if bundle is not None:
            bundle.audit.record(f"ordering n={n} k={k}", self.seed_bits)

    def rank(self, v: int) -> tuple[int, int]:
        if self._table is not None and self.width <= 63:
            return (int(self._table[v - 1]), v)
        return (self._gen.value(v), v)

    def precedes(self, u: int, v: int) -> bool:
        if u == v:
            raise UsageError("precedes() needs two distinct elements")
        return self.rank(u) < self.rank(v)

    def rank_table(self) -> np.ndarray:
        """Raw ranks for all of 1..n (position v-1), computed once."""
        if self._table is None:
            idx = np.arange(1, self.n + 1, dtype=np.uint64)
            self._table = self._gen.values_batch(idx)
        return self._table

    def as_permutation(self) -> list[int]:
        """Elements of [n] sorted by (rank, id): the projection onto S_n."""
        ranks = self.rank_table()
        if ranks.dtype == object:
            return sorted(range(1, self.n + 1), key=lambda v: (ranks[v - 1], v))
        order = np.lexsort((np.arange(1, self.n + 1), ranks))
        return [int(i) + 1 for i in order]


class PermOrdering:
    """Ordering wrapper around an explicit permutation (harness use)."""

    def __init__(self, perm):
        self.n = len(perm)
        self._pos = {int(v): i for i, v in enumerate(perm)}
        if len(self._pos) != self.n:
            raise UsageError("permutation has repeated elements")

    def rank(self, v: int) -> tuple[int, int]:
        return (self._pos[v], v)

    def precedes(self, u: int, v: int) -> bool:
        if u == v:
            raise UsageError("precedes() needs two distinct elements")
        return self._pos[u] < self._pos[v]

    def as_permutation(self) -> list[int]:
        return sorted(self._pos, key=self._pos.get)


# ---------------------------------------------------------------------------
# Biased bits (probability num/den coins from dyadic blocks).


def ceil_log2_ratio(num: int, den: int) -> int:
    """Smallest t with 2^t >= num/den."""
    t = 0
    while (1 << t) * den < num:
        t += 1
    return t


def biased_width(q_num: int, q_den: int = 1) -> int:
    """Block width w = ceil(log2 q) + 16 for probability 1/q, q = num/den."""
    if q_num <= 0 or q_den <= 0:
        raise UsageError("q must be a positive rational")
    return ceil_log2_ratio(q_num, q_den) + 16

def biased_threshold(w: int, q_num: int, q_den: int = 1) -> int:
    """round(2^w / q) with round-half-up; block value < threshold means 1."""
    if q_num <= 0 or q_den <= 0:
        raise UsageError("q must be a positive rational")
    return ((1 << w) * q_den + q_num // 2) // q_num


def block_value_from_bits(bits: KWiseBits, start: int, w: int) -> int:
    """w-bit integer from bit indices start..start+w-1, first bit = MSB."""
    val = 0
    for t in range(w):
        val = (val << 1) | bits.bit(start + t)
    return val


class BlockTape:
    """Bit tape carved into fixed-width blocks, one per slot.

    Slot s in [1, n_slots] owns bit indices (s-1)*block_width+1 .. s*block_width
    of an underlying KWiseBits generator; callers read the first w <= block_width
    bits of a block as a big-endian integer.  Values are cached (they are pure
    functions of the seed), and a vectorised path serves batch requests.
    """

    def __init__(self, n_slots: int, block_width: int, k: int, stream: SeedStream,
                 bundle: SeedBundle | None = None, label: str = "tape"):
        self.n_slots = n_slots
        self.block_width = block_width
        self.bits = KWiseBits(k, n_slots * block_width, stream)
        self._cache: dict[tuple[int, int], int] = {}
        if bundle is not None:
            bundle.audit.record(f"{label} k={k} m={self.bits.m}", self.bits.seed_bits)

    def value(self, slot: int, w: int) -> int:
        if not 1 <= slot <= self.n_slots:
            raise UsageError(f"slot {slot} out of range [1, {self.n_slots}]")
        if not 1 <= w <= self.block_width:
            raise UsageError(f"block read width {w} out of range")
        key = (slot, w)
        got = self._cache.get(key)
        if got is None:
            got = block_value_from_bits(self.bits, (slot - 1) * self.block_width + 1, w)
            self._cache[key] = got
        return got

    def values_batch(self, slots: np.ndarray, w: int) -> np.ndarray:
        """Block values for many slots at once (bypasses the scalar cache)."""
        slots = np.asarray(slots, dtype=np.uint64)
        base = (slots - np.uint64(1)) * np.uint64(self.block_width) + np.uint64(1)
        idx = base[:, None] + np.arange(w, dtype=np.uint64)[None, :]
        bits = self.bits.bits_batch(idx.ravel()).reshape(idx.shape)
        weights = (np.uint64(1) << np.arange(w - 1, -1, -1, dtype=np.uint64))
        return (bits * weights).sum(axis=1, dtype=np.uint64)
