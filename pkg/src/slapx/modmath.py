"""Integer and modular arithmetic: primality testing, prime search, RSA moduli.

Miller-Rabin with 64 rounds gives error probability below 2^-128 for random
bases on top of the deterministic small-prime filter; the contract only
requires < 2^-64.
"""
from __future__ import annotations

from .errors import ParameterError
from .rng import SeededRng

MR_ROUNDS = 64

_SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113,
                 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181,
                 191, 193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251]


def is_probable_prime(n: int, rng: SeededRng | None = None, rounds: int = MR_ROUNDS) -> bool:
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    # write n-1 = d * 2^s with d odd
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    rng = rng or SeededRng(0xA5A5 ^ (n & 0xFFFFFFFF))
    for _ in range(rounds):
        a = 2 + rng.randrange(n - 3) if n > 4 else 2
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = (x * x) % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    if n <= 2:
        return 2
    c = n | 1  # first odd candidate >= n
    if c < n:
        c += 2
    while not is_probable_prime(c):
        c += 2
    return c


def random_prime(bits: int, rng: SeededRng) -> int:
    """Random prime with exactly `bits` bits. For >= 16 bits the top two
    bits are forced so a product of two such primes reaches the full
    modulus width; tiny widths force only the top bit (the candidate pool
    is too small otherwise)."""
    if bits < 3:
        raise ParameterError("prime size too small")
    top = (1 << (bits - 1)) | (1 << (bits - 2)) if bits >= 16 else 1 << (bits - 1)
    for _ in range(40 * bits):
        cand = rng.randint_bits(bits) | top | 1
        if is_probable_prime(cand, rng):
            return cand
    raise ParameterError(f"no {bits}-bit prime found within retry bound")


class RsaModulus:
    """Composite modulus N = p*q; the factors are discarded after setup."""

    __slots__ = ("n", "bit_length")

    def __init__(self, n: int):
        self.n = n
        self.bit_length = n.bit_length()

    def __eq__(self, other):
        return isinstance(other, RsaModulus) and self.n == other.n

    def __hash__(self):
        return hash(self.n)

    def __repr__(self):
        return f"RsaModulus({self.bit_length} bits)"


MIN_MODULUS_BITS = 64


def rsa_setup(bit_length: int, rng: SeededRng, _allow_tiny: bool = False) -> RsaModulus:
    """Generate N = p*q. Moduli below 64 bits are only for brute-force
    oracle tests and must be requested explicitly via _allow_tiny."""
    floor = 8 if _allow_tiny else MIN_MODULUS_BITS
    if bit_length < floor:
        raise ParameterError(f"modulus must be at least {floor} bits, got {bit_length}")
    half = bit_length // 2
    p = random_prime(half, rng)
    q = random_prime(bit_length - half, rng)
    for _ in range(64):
        if q != p:
            break
        q = random_prime(bit_length - half, rng)
    else:
        raise ParameterError("could not find distinct prime factors")
    n = p * q
    del p, q  # factors never persisted
    return RsaModulus(n)
