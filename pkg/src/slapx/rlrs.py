"""Event-oriented linkable ring signature with revocation of double-signers.

Construction: an AOS-style one-of-n discrete-log ring proof whose challenge
chain also binds a per-event link tag tau = u0^s, where u0 is derived by
hashing the event identifier onto the curve and s is the signer's secret.
Two signatures by one signer under one event therefore carry identical
tags; the issuer resolves a linked tag back to an identity by recomputing
u0^s(id) for the candidates in the ring intersection, and only then.

The wire encoding is a fixed 640-byte block (tag, ring size, challenge,
response scalars, zero padding) so message-size accounting is independent
of the ring size.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

from .errors import CryptoError, ParameterError
from .group import Group, GroupElement, group_setup
from .hashes import H_tagged
from .rng import SeededRng

SIGNATURE_BYTES = 640


@dataclass(frozen=True)
class EventId:
    """Scope of linkability: location, time-window index, beacon digest."""
    l_x: float
    l_y: float
    ts: int
    beacon_digest: bytes

    def encode(self) -> bytes:
        # fixed-width l_x || l_y || ts || hash(beacon); millimeter fixed point
        return (int(round(self.l_x * 1000)).to_bytes(8, "big", signed=True)
                + int(round(self.l_y * 1000)).to_bytes(8, "big", signed=True)
                + self.ts.to_bytes(8, "big")
                + self.beacon_digest[:32].ljust(32, b"\x00"))


@dataclass(frozen=True)
class RlrsSignature:
    c1: int
    responses: tuple[int, ...]
    tau: GroupElement


class RlrsParams:
    def __init__(self, group: Group, t_max: int):
        self.group = group
        self.t_max = t_max
        self._directory: dict[str, GroupElement] = {}
        self._lock = threading.Lock()

    def register(self, identity: str, pk: GroupElement) -> None:
        with self._lock:
            self._directory[identity] = pk

    def public_key(self, identity: str) -> GroupElement:
        with self._lock:
            pk = self._directory.get(identity)
        if pk is None:
            raise CryptoError(f"unknown identity: {identity}")
        return pk

    def fingerprint(self) -> bytes:
        return H_tagged("rlrs/pp", self.group.spec.name.encode(),
                        self.t_max.to_bytes(2, "big"))


def _max_ring_for_encoding(group: Group) -> int:
    # tau || u8 n || c1 || n scalars must fit the fixed block
    esz, ssz = group.element_size(), group.scalar_size()
    return (SIGNATURE_BYTES - esz - 1 - ssz) // ssz


def rlrs_setup(security_bits: int, t_max: int,
               rng: SeededRng | None = None) -> tuple[bytes, RlrsParams]:
    if t_max < 1:
        raise ParameterError("t_max must be at least 1")
    group, _ = group_setup(security_bits)
    cap = _max_ring_for_encoding(group)
    if t_max > cap:
        raise ParameterError(f"t_max {t_max} exceeds encoding capacity {cap}")
    rng = rng or SeededRng()
    msk = rng.bytes(32)
    return msk, RlrsParams(group, t_max)


def rlrs_extract(msk: bytes, identity: str, params: RlrsParams) -> int:
    """Deterministic per (msk, identity); registers the public key."""
    if not identity:
        raise ParameterError("identity must be nonempty")
    g = params.group
    s = g.hash_to_scalar("rlrs/extract", msk, identity.encode())
    if s == 0:
        s = 1
    params.register(identity, g.mul(g.generator, s))
    return s


def _ring_digest(params: RlrsParams, ring: list[str]) -> bytes:
    return H_tagged("rlrs/ring", *[i.encode() for i in ring])


def _chain_challenge(params: RlrsParams, ring_digest: bytes, m: bytes,
                     event_enc: bytes, tau: GroupElement,
                     L: GroupElement, R: GroupElement) -> int:
    return params.group.hash_to_scalar(
        "rlrs/chain", params.fingerprint(), ring_digest, m, event_enc,
        tau.to_bytes(), L.to_bytes(), R.to_bytes())


def event_base(params: RlrsParams, event: EventId) -> GroupElement:
    return params.group.hash_to_point("rlrs/event", event.encode())


def link_tag(params: RlrsParams, sk: int, event: EventId) -> GroupElement:
    return params.group.mul(event_base(params, event), sk)


def _validate_ring(params: RlrsParams, ring: list[str]) -> None:
    if not ring:
        raise CryptoError("empty ring")
    if len(ring) > params.t_max:
        raise CryptoError("ring exceeds t_max")
    if len(set(ring)) != len(ring):
        raise CryptoError("duplicate ring member")


def rlrs_sign(sk: int, m: bytes, ring: list[str], event: EventId,
              params: RlrsParams, rng: SeededRng) -> RlrsSignature:
    _validate_ring(params, ring)
    g = params.group
    own_pk = g.mul(g.generator, sk)
    pks = [params.public_key(i) for i in ring]
    try:
        signer = pks.index(own_pk)
    except ValueError:
        raise CryptoError("signer not in ring") from None

    n = len(ring)
    u0 = event_base(params, event)
    tau = g.mul(u0, sk)
    rd = _ring_digest(params, ring)
    ev = event.encode()

    c = [0] * n
    s_vals = [0] * n
    alpha = g.random_scalar(rng)
    L = g.mul(g.generator, alpha)
    R = g.mul(u0, alpha)
    c[(signer + 1) % n] = _chain_challenge(params, rd, m, ev, tau, L, R)
    idx = (signer + 1) % n
    while idx != signer:
        s_vals[idx] = g.random_scalar(rng)
        L = g.muladd(s_vals[idx], g.generator, c[idx], pks[idx])
        R = g.muladd(s_vals[idx], u0, c[idx], tau)
        c[(idx + 1) % n] = _chain_challenge(params, rd, m, ev, tau, L, R)
        idx = (idx + 1) % n
    s_vals[signer] = (alpha - c[signer] * sk) % g.order
    return RlrsSignature(c1=c[0], responses=tuple(s_vals), tau=tau)


def rlrs_verify(ring: list[str], m: bytes, event: EventId,
                sig: RlrsSignature, params: RlrsParams) -> bool:
    try:
        _validate_ring(params, ring)
        pks = [params.public_key(i) for i in ring]
    except CryptoError:
        return False
    if len(sig.responses) != len(ring) or sig.tau.is_identity:
        return False
    g = params.group
    u0 = event_base(params, event)
    rd = _ring_digest(params, ring)
    ev = event.encode()
    c_i = sig.c1
    for i in range(len(ring)):
        L = g.muladd(sig.responses[i], g.generator, c_i, pks[i])
        R = g.muladd(sig.responses[i], u0, c_i, sig.tau)
        c_i = _chain_challenge(params, rd, m, ev, sig.tau, L, R)
    return c_i == sig.c1


def rlrs_link(ring_a: list[str], event: EventId, signed_a: tuple[bytes, RlrsSignature],
              ring_b: list[str], signed_b: tuple[bytes, RlrsSignature],
              params: RlrsParams) -> bool:
    """True iff both signatures verify under the event and share a tag."""
    m_a, sig_a = signed_a
    m_b, sig_b = signed_b
    if not rlrs_verify(ring_a, m_a, event, sig_a, params):
        raise CryptoError("first signature invalid")
    if not rlrs_verify(ring_b, m_b, event, sig_b, params):
        raise CryptoError("second signature invalid")
    return sig_a.tau == sig_b.tau


def rlrs_revoke(msk: bytes, event: EventId,
                ring_a: list[str], signed_a: tuple[bytes, RlrsSignature],
                ring_b: list[str], signed_b: tuple[bytes, RlrsSignature],
                params: RlrsParams) -> str | None:
    """Issuer-side identity extraction; non-None only for a linked pair.

    Resolves the shared tag against tags recomputed on demand for the ring
    intersection; returns None for unlinked inputs or an empty intersection.
    """
    try:
        linked = rlrs_link(ring_a, event, signed_a, ring_b, signed_b, params)
    except CryptoError:
        return None
    if not linked:
        return None
    tau = signed_a[1].tau
    g = params.group
    u0 = event_base(params, event)
    for identity in ring_a:
        if identity not in ring_b:
            continue
        s = g.hash_to_scalar("rlrs/extract", msk, identity.encode()) or 1
        if g.mul(u0, s) == tau:
            return identity
    return None


# -- fixed-size wire block ---------------------------------------------

def encode_signature(sig: RlrsSignature, params: RlrsParams) -> bytes:
    g = params.group
    out = bytearray()
    out += sig.tau.to_bytes()
    out += len(sig.responses).to_bytes(1, "big")
    out += g.scalar_to_bytes(sig.c1)
    for s in sig.responses:
        out += g.scalar_to_bytes(s)
    if len(out) > SIGNATURE_BYTES:
        raise CryptoError("ring too large for fixed signature block")
    return bytes(out) + b"\x00" * (SIGNATURE_BYTES - len(out))


def decode_signature(block: bytes, params: RlrsParams) -> RlrsSignature:
    if len(block) != SIGNATURE_BYTES:
        raise CryptoError("bad signature block length")
    g = params.group
    esz, ssz = g.element_size(), g.scalar_size()
    tau = g.from_bytes(block[:esz])
    n = block[esz]
    off = esz + 1
    c1 = g.scalar_from_bytes(block[off:off + ssz])
    off += ssz
    responses = []
    for _ in range(n):
        responses.append(g.scalar_from_bytes(block[off:off + ssz]))
        off += ssz
    if any(block[off:]):
        raise CryptoError("nonzero padding")
    return RlrsSignature(c1=c1, responses=tuple(responses), tau=tau)
