"""Prime-order group abstraction over standard elliptic curves.

Scalars are plain ints in [0, order); points are immutable GroupElement
values with a fixed-width compressed serialization (1 + field bytes; the
identity encodes as all zeros). Scalar multiplication uses Jacobian
coordinates. Cofactor is 1 for every supported curve, so all curve points
lie in the prime-order group.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import CryptoError, ParameterError
from .hashes import H_int, H_tagged
from .rng import SeededRng


@dataclass(frozen=True)
class CurveSpec:
    name: str
    p: int          # field prime
    a: int
    b: int
    order: int      # group order
    gx: int
    gy: int

    @property
    def fe_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8


_SECP256K1 = CurveSpec(
    name="secp256k1",
    p=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F,
    a=0,
    b=7,
    order=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141,
    gx=0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
    gy=0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
)

_SECP384R1 = CurveSpec(
    name="secp384r1",
    p=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFFFF0000000000000000FFFFFFFF,
    a=-3,
    b=0xB3312FA7E23EE7E4988E056BE3F82D19181D9C6EFE8141120314088F5013875AC656398D8A2ED19D2A85C8EDD3EC2AEF,
    order=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFC7634D81F4372DDF581A0DB248B0A77AECEC196ACCC52973,
    gx=0xAA87CA22BE8B05378EB1C71EF320AD746E1D3B628BA79B9859F741E082542A385502F25DBF55296C3A545E3872760AB7,
    gy=0x3617DE4A96262C6F5D9E98BF9292DC29F8F41DBD289A147CE9DA3113B5F0B8C00A60B1CE1D7E819D7A431D7C90EA0E5F,
)

_SECP521R1 = CurveSpec(
    name="secp521r1",
    p=(1 << 521) - 1,
    a=-3,
    b=0x0051953EB9618E1C9A1F929A21A0B68540EEA2DA725B99B315F3B8B489918EF109E156193951EC7E937B1652C0BD3BB1BF073573DF883D2C34F1EF451FD46B503F00,
    order=0x01FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFA51868783BF2F966B7FCC0148F709A5D03BB5C9B8899C47AEBB6FB71E91386409,
    gx=0x00C6858E06B70404E9CD9E3ECB662395B4429C648139053FB521F828AF606B4D3DBAA14B5E77EFE75928FE1DC127A2FFA8DE3348B3C1856A429BF97E7E31C2E5BD66,
    gy=0x011839296A789A3BC0045C8A5FB42C7D1BD998F54449579B446817AFBD17273E662C97EE72995EF42640C550B9013FAD0761353C7086A272C24088BE94769FD16650,
)

_CURVES = {128: _SECP256K1, 192: _SECP384R1, 256: _SECP521R1}


class GroupElement:
    """Immutable curve point; None coordinates represent the identity."""

    __slots__ = ("group", "x", "y")

    def __init__(self, group: "Group", x: int | None, y: int | None):
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __setattr__(self, *a):
        raise AttributeError("GroupElement is immutable")

    @property
    def is_identity(self) -> bool:
        return self.x is None

    def add(self, other: "GroupElement") -> "GroupElement":
        return self.group.add(self, other)

    def mul(self, k: int) -> "GroupElement":
        return self.group.mul(self, k)

    def neg(self) -> "GroupElement":
        if self.is_identity:
            return self
        return GroupElement(self.group, self.x, (-self.y) % self.group.spec.p)

    def to_bytes(self) -> bytes:
        g = self.group
        if self.is_identity:
            return b"\x00" * (1 + g.spec.fe_bytes)
        prefix = 0x02 | (self.y & 1)
        return bytes([prefix]) + self.x.to_bytes(g.spec.fe_bytes, "big")

    def __eq__(self, other):
        return (isinstance(other, GroupElement) and self.x == other.x
                and self.y == other.y and self.group.spec.name == other.group.spec.name)

    def __hash__(self):
        return hash((self.group.spec.name, self.x, self.y))

    def __repr__(self):
        return f"GroupElement({'identity' if self.is_identity else hex(self.x)[:12]}...)"


class Group:
    def __init__(self, spec: CurveSpec):
        self.spec = spec
        self.order = spec.order
        self.generator = GroupElement(self, spec.gx, spec.gy)
        self.identity = GroupElement(self, None, None)

    # -- affine/Jacobian arithmetic ------------------------------------

    def _jac_double(self, P):
        X1, Y1, Z1 = P
        p = self.spec.p
        if Y1 == 0:
            return (0, 1, 0)
        A = (X1 * X1) % p
        B = (Y1 * Y1) % p
        C = (B * B) % p
        D = (2 * ((X1 + B) * (X1 + B) - A - C)) % p
        Zsq = (Z1 * Z1) % p
        E = (3 * A + self.spec.a * Zsq % p * Zsq) % p
        X3 = (E * E - 2 * D) % p
        Y3 = (E * (D - X3) - 8 * C) % p
        Z3 = (2 * Y1 * Z1) % p
        return (X3, Y3, Z3)

    def _jac_add(self, P, Q):
        p = self.spec.p
        X1, Y1, Z1 = P
        X2, Y2, Z2 = Q
        if Z1 == 0:
            return Q
        if Z2 == 0:
            return P
        Z1s = (Z1 * Z1) % p
        Z2s = (Z2 * Z2) % p
        U1 = (X1 * Z2s) % p
        U2 = (X2 * Z1s) % p
        S1 = (Y1 * Z2s * Z2) % p
        S2 = (Y2 * Z1s * Z1) % p
        if U1 == U2:
            if S1 != S2:
                return (0, 1, 0)
            return self._jac_double(P)
        Hh = (U2 - U1) % p
        I = (4 * Hh * Hh) % p
        J = (Hh * I) % p
        r = (2 * (S2 - S1)) % p
        V = (U1 * I) % p
        X3 = (r * r - J - 2 * V) % p
        Y3 = (r * (V - X3) - 2 * S1 * J) % p
        Z3 = ((Z1 + Z2) * (Z1 + Z2) - Z1s - Z2s) % p
        Z3 = (Z3 * Hh) % p
        return (X3, Y3, Z3)

    def _to_jac(self, P: GroupElement):
        if P.is_identity:
            return (0, 1, 0)
        return (P.x, P.y, 1)

    def _from_jac(self, P) -> GroupElement:
        X, Y, Z = P
        if Z == 0:
            return self.identity
        p = self.spec.p
        zinv = pow(Z, p - 2, p)
        zinv2 = (zinv * zinv) % p
        return GroupElement(self, (X * zinv2) % p, (Y * zinv2 * zinv) % p)

    def add(self, P: GroupElement, Q: GroupElement) -> GroupElement:
        if P.is_identity:
            return Q
        if Q.is_identity:
            return P
        return self._from_jac(self._jac_add(self._to_jac(P), self._to_jac(Q)))

    def mul(self, P: GroupElement, k: int) -> GroupElement:
        k %= self.order
        if k == 0 or P.is_identity:
            return self.identity
        acc = (0, 1, 0)
        base = self._to_jac(P)
        for bit in bin(k)[2:]:
            acc = self._jac_double(acc)
            if bit == "1":
                acc = self._jac_add(acc, base)
        return self._from_jac(acc)

    def muladd(self, a: int, P: GroupElement, b: int, Q: GroupElement) -> GroupElement:
        """a*P + b*Q via interleaved (Shamir) ladder."""
        a %= self.order
        b %= self.order
        if a == 0:
            return self.mul(Q, b)
        if b == 0:
            return self.mul(P, a)
        jp, jq = self._to_jac(P), self._to_jac(Q)
        jpq = self._jac_add(jp, jq)
        acc = (0, 1, 0)
        for i in range(max(a.bit_length(), b.bit_length()) - 1, -1, -1):
            acc = self._jac_double(acc)
            ab = (a >> i) & 1
            bb = (b >> i) & 1
            if ab and bb:
                acc = self._jac_add(acc, jpq)
            elif ab:
                acc = self._jac_add(acc, jp)
            elif bb:
                acc = self._jac_add(acc, jq)
        return self._from_jac(acc)

    # -- encoding ------------------------------------------------------

    def element_size(self) -> int:
        return 1 + self.spec.fe_bytes

    def scalar_size(self) -> int:
        return (self.order.bit_length() + 7) // 8

    def from_bytes(self, data: bytes) -> GroupElement:
        if len(data) != self.element_size():
            raise CryptoError("bad element length")
        if data == b"\x00" * len(data):
            return self.identity
        prefix, xb = data[0], data[1:]
        if prefix not in (2, 3):
            raise CryptoError("bad element prefix")
        x = int.from_bytes(xb, "big")
        p = self.spec.p
        if x >= p:
            raise CryptoError("x out of range")
        y2 = (pow(x, 3, p) + self.spec.a * x + self.spec.b) % p
        y = pow(y2, (p + 1) // 4, p)  # all supported primes are 3 mod 4
        if (y * y) % p != y2:
            raise CryptoError("point not on curve")
        if (y & 1) != (prefix & 1):
            y = p - y
        return GroupElement(self, x, y)

    def is_on_curve(self, P: GroupElement) -> bool:
        if P.is_identity:
            return True
        p = self.spec.p
        return (P.y * P.y - (pow(P.x, 3, p) + self.spec.a * P.x + self.spec.b)) % p == 0

    def random_scalar(self, rng: SeededRng) -> int:
        while True:
            k = rng.randint_bits(self.order.bit_length())
            if 0 < k < self.order:
                return k

    def scalar_to_bytes(self, k: int) -> bytes:
        if not 0 <= k < self.order:
            raise CryptoError("scalar out of range")
        return k.to_bytes(self.scalar_size(), "big")

    def scalar_from_bytes(self, data: bytes) -> int:
        if len(data) != self.scalar_size():
            raise CryptoError("bad scalar length")
        k = int.from_bytes(data, "big")
        if k >= self.order:
            raise CryptoError("scalar out of range")
        return k

    def hash_to_point(self, tag: str, msg: bytes) -> GroupElement:
        """Deterministic try-and-increment mapping onto the curve."""
        p = self.spec.p
        ctr = 0
        while True:
            digest = H_tagged("h2p/" + tag, msg, ctr.to_bytes(4, "big"))
            x = int.from_bytes(digest, "big")
            x = x % p if x >= p else x
            y2 = (pow(x, 3, p) + self.spec.a * x + self.spec.b) % p
            y = pow(y2, (p + 1) // 4, p)
            if (y * y) % p == y2:
                if (y & 1) != (digest[0] & 1):
                    y = p - y
                pt = GroupElement(self, x, y)
                if not pt.is_identity:
                    return pt
            ctr += 1

    def hash_to_scalar(self, tag: str, *parts: bytes) -> int:
        return H_int(tag, *parts) % self.order


def group_setup(security_bits: int) -> tuple[Group, GroupElement]:
    """Standard curve for the nominal security level; returns (group, generator)."""
    spec = _CURVES.get(security_bits)
    if spec is None:
        raise ParameterError(f"unsupported security level: {security_bits}")
    g = Group(spec)
    return g, g.generator


# -- plain discrete-log signatures (used for puzzle issuance and
#    delegation-key certificates) -------------------------------------

class SigningKey:
    def __init__(self, group: Group, sk: int):
        self.group = group
        self.sk = sk
        self.pk = group.mul(group.generator, sk)

    @classmethod
    def generate(cls, group: Group, rng: SeededRng) -> "SigningKey":
        return cls(group, group.random_scalar(rng))

    def sign(self, msg: bytes, rng: SeededRng) -> bytes:
        """Compact challenge-form signature: c (16 bytes) || s (scalar)."""
        g = self.group
        k = g.random_scalar(rng)
        R = g.mul(g.generator, k)
        c = H_int("sgn", R.to_bytes(), self.pk.to_bytes(), msg) >> 128
        s = (k + c * self.sk) % g.order
        return c.to_bytes(16, "big") + g.scalar_to_bytes(s)


def sgn_verify(group: Group, pk: GroupElement, msg: bytes, sig: bytes) -> bool:
    ssz = group.scalar_size()
    if len(sig) != 16 + ssz:
        return False
    c = int.from_bytes(sig[:16], "big")
    try:
        s = group.scalar_from_bytes(sig[16:])
    except CryptoError:
        return False
    # R = g^s * pk^-c, then the challenge must recompute
    R = group.muladd(s, group.generator, (-c) % group.order, pk)
    return c == H_int("sgn", R.to_bytes(), pk.to_bytes(), msg) >> 128


def sgn_signature_size(group: Group) -> int:
    return 16 + group.scalar_size()
