"""Attribute credentials with selective disclosure, re-randomizable
presentations, and one-level delegation.

Instantiation. The root issuer holds an RSA modulus with one signing
exponent per delegation level. A credential on attribute set A bound to
user secret u is the e-th root

    sigma = (R_sk^u * S^o * prod_i R_i^{m_i})^(1/e_level)  mod n,

a multi-base commitment to u, an opening o, and the attribute digests m_i.
A presentation re-randomizes sigma by a fresh factor t (sigma' = sigma*t,
with t^e folded into the proven relation), so every transcript is
statistically fresh, and proves knowledge of the hidden exponents by a
Fiat-Shamir AND-composition that also binds the shown pseudonym, the
disclosed subset, a caller context string, and an arbitrary payload.
Forging a presentation without a credential reduces to extracting e-th
roots mod n.

Delegation (level 2, terminal in the shipped configuration): the root
certifies a delegation verification key; the delegator signs an extension
binding the recipient's one-time pseudonym nym_d and the added attribute
set. Compound presentations prove the base credential and the extension
under one challenge with a shared response for u, so both certify the same
holder. Presentations of one delegated credential share the nym_d/extension
bytes; a fresh delegated credential is issued per time window, which scopes
that linkability to the window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CryptoError, ParameterError
from .group import Group, GroupElement, SigningKey, group_setup, sgn_verify
from .hashes import H_int, H_tagged
from .modmath import random_prime
from .rng import SeededRng

CRED_WIRE_BYTES = 224
DEFAULT_MODULUS_BITS = 1024  # keeps the credential inside the fixed wire block

_ATTR_BITS = 128     # attribute digest width
_SECRET_BITS = 128   # user secrets and openings
_CHAL_BITS = 128
_SLACK_BITS = 80     # statistical hiding margin on integer responses
Z_BYTES = (_SECRET_BITS + _CHAL_BITS + _SLACK_BITS + 7) // 8 + 6  # 48


# -- attributes ---------------------------------------------------------

_FIXED_WIDTH = {"location": 16, "ts_window": 8, "timestamp": 8, "device_id": 8,
                "tx_power": 2, "device_type": 1, "validity": 16, "pol": 32}


@dataclass(frozen=True)
class Attribute:
    kind: str
    value: bytes

    def __post_init__(self):
        width = _FIXED_WIDTH.get(self.kind)
        if width is not None and len(self.value) != width:
            raise ParameterError(f"{self.kind} attribute must be {width} bytes")

    def digest(self) -> int:
        return H_int("dac/attr", self.kind.encode(), self.value) >> (256 - _ATTR_BITS)

    def encode(self) -> bytes:
        k = self.kind.encode()
        return bytes([len(k)]) + k + len(self.value).to_bytes(2, "big") + self.value

    @staticmethod
    def location(l_x: float, l_y: float) -> "Attribute":
        v = (int(round(l_x * 1000)).to_bytes(8, "big", signed=True)
             + int(round(l_y * 1000)).to_bytes(8, "big", signed=True))
        return Attribute("location", v)

    @staticmethod
    def ts_window(idx: int) -> "Attribute":
        return Attribute("ts_window", idx.to_bytes(8, "big"))


def attrs_digest(attrs: tuple[Attribute, ...]) -> bytes:
    return H_tagged("dac/attrs", *[a.encode() for a in attrs])[:16]


# -- public parameters and keys ------------------------------------------

class DacParams:
    def __init__(self, n: int, exponents: tuple[int, ...], t: int,
                 cert_group: Group, cert_pk: GroupElement):
        self.n = n
        self.exponents = exponents    # one signing exponent per level
        self.t = t
        self.eta = len(exponents)
        self.cert_group = cert_group
        self.cert_pk = cert_pk
        self.base_S = self._derive_base("S", 0)
        self.base_sk = self._derive_base("R_sk", 0)
        self.bases = tuple(self._derive_base("R", i) for i in range(t))

    def _derive_base(self, tag: str, i: int) -> int:
        x = H_int("dac/base", tag.encode(), i.to_bytes(2, "big"),
                  self.n.to_bytes((self.n.bit_length() + 7) // 8, "big")) % self.n
        return pow(x, 2, self.n)  # square => quadratic residue

    def fingerprint(self) -> bytes:
        return H_tagged("dac/pp", self.n.to_bytes(256, "big").lstrip(b"\x00"),
                        *[e.to_bytes(24, "big") for e in self.exponents],
                        self.t.to_bytes(2, "big"), self.cert_pk.to_bytes())

    @property
    def n_bytes(self) -> int:
        return (self.n.bit_length() + 7) // 8


@dataclass
class RootIssuerKey:
    params: DacParams
    roots: tuple[int, ...]          # d_level with d*e = 1 mod lambda(n)
    cert_key: SigningKey


@dataclass(frozen=True)
class DelegationKey:
    max_level: int
    secret: int | None              # EC signing scalar; None on received side
    vk_bytes: bytes                 # delegation verification key
    cert: bytes                     # root certificate over (vk, max_level)


@dataclass
class Credential:
    level: int
    sigma: int
    opening: int
    attrs: tuple[Attribute, ...]
    dk: DelegationKey | None


@dataclass
class DelegatedCredential:
    level: int
    attrs: tuple[Attribute, ...]    # extension attribute set A_l
    nym_d: int                      # one-time recipient pseudonym
    r_d: int                        # its opening randomness (holder-side)
    vk_bytes: bytes
    cert: bytes
    ext_sig: bytes
    base: Credential                # recipient's own root credential
    dk: DelegationKey | None = None  # terminal when None


def dac_setup(security_bits: int, t: int, eta: int,
              rng: SeededRng | None = None,
              modulus_bits: int = DEFAULT_MODULUS_BITS) -> tuple[DacParams, RootIssuerKey]:
    if eta < 2:
        raise ParameterError("delegation depth must exceed 1")
    if t < 1:
        raise ParameterError("attribute bound must be at least 1")
    rng = rng or SeededRng()
    half = modulus_bits // 2
    p = random_prime(half, rng)
    q = random_prime(modulus_bits - half, rng)
    while q == p:
        q = random_prime(modulus_bits - half, rng)
    n = p * q
    lam = (p - 1) * (q - 1) // math.gcd(p - 1, q - 1)
    exps, roots = [], []
    while len(exps) < eta:
        e = random_prime(192, rng)
        if math.gcd(e, lam) == 1 and e not in exps:
            exps.append(e)
            roots.append(pow(e, -1, lam))
    del p, q, lam
    cert_group, _ = group_setup(security_bits)
    cert_key = SigningKey.generate(cert_group, rng)
    params = DacParams(n, tuple(exps), t, cert_group, cert_key.pk)
    return params, RootIssuerKey(params, tuple(roots), cert_key)


def dac_keygen(params: DacParams, rng: SeededRng) -> tuple[int, int]:
    """(pk, sk); pk = R_sk^sk serves as the initial pseudonym."""
    u = rng.randint_bits(_SECRET_BITS) | 1
    return pow(params.base_sk, u, params.n), u


def dac_nymgen(params: DacParams, pk: int, rng: SeededRng) -> tuple[int, int]:
    """Fresh pseudonym nym = pk * S^aux and its auxiliary randomness."""
    aux = rng.randint_bits(_SECRET_BITS) | 1
    return (pk * pow(params.base_S, aux, params.n)) % params.n, aux


# -- issuance -------------------------------------------------------------

@dataclass(frozen=True)
class IssuanceRequest:
    blinded: int       # R_sk^u * S^{o_u}
    c: int
    z_u: int
    z_o: int


def dac_request_cred(params: DacParams, sk: int, rng: SeededRng) -> tuple[IssuanceRequest, int]:
    """User side of GetCred: blind the secret key, prove the opening."""
    n = params.n
    o_u = rng.randint_bits(_SECRET_BITS)
    blinded = (pow(params.base_sk, sk, n) * pow(params.base_S, o_u, n)) % n
    k_u = rng.randint_bits(_SECRET_BITS + _CHAL_BITS + _SLACK_BITS)
    k_o = rng.randint_bits(_SECRET_BITS + _CHAL_BITS + _SLACK_BITS)
    T = (pow(params.base_sk, k_u, n) * pow(params.base_S, k_o, n)) % n
    c = H_int("dac/getcred", params.fingerprint(),
              blinded.to_bytes(params.n_bytes, "big"),
              T.to_bytes(params.n_bytes, "big")) >> (256 - _CHAL_BITS)
    return IssuanceRequest(blinded, c, k_u + c * sk, k_o + c * o_u), o_u


def dac_create_cred(root: RootIssuerKey, request: IssuanceRequest,
                    attrs: tuple[Attribute, ...], max_delegation_level: int,
                    rng: SeededRng) -> tuple[int, int, DelegationKey | None]:
    """Issuer side of CreateCred: returns (sigma, issuer opening share, dk)."""
    params = root.params
    n = params.n
    if len(attrs) > params.t:
        raise ParameterError("attribute set exceeds bound t")
    if not 1 <= max_delegation_level <= params.eta:
        raise ParameterError("delegation level out of range")
    # check the requester's opening proof
    T = (pow(params.base_sk, request.z_u, n) * pow(params.base_S, request.z_o, n)
         * pow(request.blinded, -request.c, n)) % n
    c = H_int("dac/getcred", params.fingerprint(),
              request.blinded.to_bytes(params.n_bytes, "big"),
              T.to_bytes(params.n_bytes, "big")) >> (256 - _CHAL_BITS)
    if c != request.c:
        raise CryptoError("issuance request proof invalid")
    o_i = rng.randint_bits(_SECRET_BITS)
    body = (request.blinded * pow(params.base_S, o_i, n)) % n
    for i, a in enumerate(attrs):
        body = (body * pow(params.bases[i], a.digest(), n)) % n
    sigma = pow(body, root.roots[0], n)
    dk = None
    if max_delegation_level >= 2:
        dk_key = SigningKey.generate(params.cert_group, rng)
        cert = root.cert_key.sign(
            H_tagged("dac/dkcert", dk_key.pk.to_bytes(),
                     bytes([max_delegation_level])), rng)
        dk = DelegationKey(max_delegation_level, dk_key.sk,
                           dk_key.pk.to_bytes(), cert)
    return sigma, o_i, dk


def dac_get_cred(params: DacParams, sk: int, o_u: int, sigma: int, o_i: int,
                 attrs: tuple[Attribute, ...], dk: DelegationKey | None) -> Credential:
    """User side completion: verify the root signature, assemble the credential."""
    n = params.n
    body = (pow(params.base_sk, sk, n) * pow(params.base_S, o_u + o_i, n)) % n
    for i, a in enumerate(attrs):
        body = (body * pow(params.bases[i], a.digest(), n)) % n
    if pow(sigma, params.exponents[0], n) != body:
        raise CryptoError("issued credential does not verify")
    return Credential(level=1, sigma=sigma, opening=o_u + o_i, attrs=attrs, dk=dk)


def issue_credential(root: RootIssuerKey, sk: int, attrs: tuple[Attribute, ...],
                     max_delegation_level: int, rng: SeededRng) -> Credential:
    """CreateCred <-> GetCred round trip in one call (in-process issuance)."""
    request, o_u = dac_request_cred(root.params, sk, rng)
    sigma, o_i, dk = dac_create_cred(root, request, attrs, max_delegation_level, rng)
    return dac_get_cred(root.params, sk, o_u, sigma, o_i, attrs, dk)


# -- presentation ----------------------------------------------------------

@dataclass(frozen=True)
class ExtShow:
    nym_d: int
    z_rd: int
    vk_bytes: bytes
    cert: bytes
    ext_sig: bytes
    attrs: tuple[Attribute, ...]
    level: int


@dataclass(frozen=True)
class Presentation:
    level: int
    nym: int
    sigma_r: int
    c: int
    z_t: int
    z_u: int
    z_o: int
    z_r: int
    hidden: tuple[tuple[int, int], ...]          # (slot index, response)
    disclosed: tuple[tuple[int, Attribute], ...]  # (slot index, attribute)
    ext: ExtShow | None = None

    def to_bytes(self, params: DacParams) -> bytes:
        nb = params.n_bytes
        out = bytearray()
        out += bytes([1, self.level])
        out += self.nym.to_bytes(nb, "big")
        out += self.sigma_r.to_bytes(nb, "big")
        out += self.c.to_bytes(16, "big")
        out += self.z_t.to_bytes(nb, "big")
        for z in (self.z_u, self.z_o, self.z_r):
            out += z.to_bytes(Z_BYTES, "big")
        out += bytes([len(self.hidden)])
        for idx, z in self.hidden:
            out += bytes([idx]) + z.to_bytes(Z_BYTES, "big")
        out += bytes([len(self.disclosed)])
        for idx, a in self.disclosed:
            out += bytes([idx]) + a.encode()
        if self.ext is None:
            out += b"\x00"
        else:
            e = self.ext
            out += b"\x01" + bytes([e.level])
            out += e.nym_d.to_bytes(nb, "big")
            out += e.z_rd.to_bytes(Z_BYTES, "big")
            out += e.vk_bytes + e.cert + e.ext_sig
            out += bytes([len(e.attrs)])
            for a in e.attrs:
                out += a.encode()
        return bytes(out)


def _disclosed_enc(disclosed) -> bytes:
    return H_tagged("dac/disclosed",
                    *[bytes([idx]) + a.encode() for idx, a in disclosed])


def _show_challenge(params: DacParams, level: int, nym: int, sigma_r: int,
                    disclosed, context: bytes, payload: bytes,
                    T_V: int, T_nym: int, ext_part: bytes, T_ext: int | None) -> int:
    nb = params.n_bytes
    parts = [params.fingerprint(), bytes([level]),
             nym.to_bytes(nb, "big"), sigma_r.to_bytes(nb, "big"),
             _disclosed_enc(disclosed), context, payload,
             T_V.to_bytes(nb, "big"), T_nym.to_bytes(nb, "big"), ext_part]
    if T_ext is not None:
        parts.append(T_ext.to_bytes(nb, "big"))
    return H_int("dac/show", *parts) >> (256 - _CHAL_BITS)


def dac_cred_prove(params: DacParams, sk: int, nym: int, aux: int,
                   cred: Credential | DelegatedCredential,
                   disclose: tuple[int, ...], context: bytes,
                   rng: SeededRng, payload: bytes = b"") -> Presentation:
    """Zero-knowledge presentation disclosing the attribute slots in
    `disclose`; bound to (context, payload). For delegated credentials the
    extension attributes are shown in full alongside the base credential."""
    ext_cred = None
    if isinstance(cred, DelegatedCredential):
        ext_cred = cred
        base = cred.base
    else:
        base = cred
    n = params.n
    e = params.exponents[0]
    if any(i >= len(base.attrs) for i in disclose):
        raise CryptoError("disclosed attribute not in committed set")
    disclosed = tuple((i, base.attrs[i]) for i in sorted(disclose))
    hidden_idx = [i for i in range(len(base.attrs)) if i not in disclose]

    t_r = 2 + rng.randrange(n - 3)
    sigma_r = (base.sigma * t_r) % n

    width = _SECRET_BITS + _CHAL_BITS + _SLACK_BITS
    k_u = rng.randint_bits(width)
    k_o = rng.randint_bits(width)
    k_r = rng.randint_bits(width)
    k_t = 2 + rng.randrange(n - 3)
    k_h = {i: rng.randint_bits(width) for i in hidden_idx}

    T_V = (pow(params.base_sk, k_u, n) * pow(params.base_S, k_o, n)
           * pow(k_t, e, n)) % n
    for i in hidden_idx:
        T_V = (T_V * pow(params.bases[i], k_h[i], n)) % n
    T_nym = (pow(params.base_sk, k_u, n) * pow(params.base_S, k_r, n)) % n

    ext_part = b""
    T_ext = None
    k_rd = 0
    if ext_cred is not None:
        ext_part = H_tagged("dac/extpart", ext_cred.vk_bytes, ext_cred.cert,
                            ext_cred.ext_sig,
                            ext_cred.nym_d.to_bytes(params.n_bytes, "big"),
                            attrs_digest(ext_cred.attrs), bytes([ext_cred.level]))
        k_rd = rng.randint_bits(width)
        T_ext = (pow(params.base_sk, k_u, n) * pow(params.base_S, k_rd, n)) % n

    c = _show_challenge(params, base.level, nym, sigma_r, disclosed,
                        context, payload, T_V, T_nym, ext_part, T_ext)

    ext_show = None
    if ext_cred is not None:
        ext_show = ExtShow(nym_d=ext_cred.nym_d, z_rd=k_rd + c * ext_cred.r_d,
                           vk_bytes=ext_cred.vk_bytes, cert=ext_cred.cert,
                           ext_sig=ext_cred.ext_sig, attrs=ext_cred.attrs,
                           level=ext_cred.level)
    return Presentation(
        level=base.level, nym=nym, sigma_r=sigma_r, c=c,
        z_t=(k_t * pow(t_r, c, n)) % n,
        z_u=k_u + c * sk, z_o=k_o + c * base.opening, z_r=k_r + c * aux,
        hidden=tuple((i, k_h[i] + c * base.attrs[i].digest()) for i in hidden_idx),
        disclosed=disclosed, ext=ext_show)


def dac_cred_verify(params: DacParams, pres: Presentation,
                    context: bytes, payload: bytes = b"") -> bool:
    n = params.n
    if pres.level != 1 or not (0 < pres.sigma_r < n) or not (0 < pres.nym < n):
        return False
    e = params.exponents[0]
    slots = {i for i, _ in pres.hidden} | {i for i, _ in pres.disclosed}
    if len(slots) != len(pres.hidden) + len(pres.disclosed) or any(
            i >= params.t for i in slots):
        return False

    # V = sigma_r^e / prod(disclosed bases^digest)
    V = pow(pres.sigma_r, e, n)
    for i, a in pres.disclosed:
        V = (V * pow(params.bases[i], -a.digest(), n)) % n

    T_V = (pow(params.base_sk, pres.z_u, n) * pow(params.base_S, pres.z_o, n)
           * pow(pres.z_t, e, n) * pow(V, -pres.c, n)) % n
    for i, z in pres.hidden:
        T_V = (T_V * pow(params.bases[i], z, n)) % n
    T_nym = (pow(params.base_sk, pres.z_u, n) * pow(params.base_S, pres.z_r, n)
             * pow(pres.nym, -pres.c, n)) % n

    ext_part = b""
    T_ext = None
    if pres.ext is not None:
        ext = pres.ext
        if not 2 <= ext.level <= params.eta:
            return False
        try:
            vk = params.cert_group.from_bytes(ext.vk_bytes)
        except CryptoError:
            return False
        cert_body = H_tagged("dac/dkcert", ext.vk_bytes, bytes([ext.level]))
        if not sgn_verify(params.cert_group, params.cert_pk, cert_body, ext.cert):
            return False
        ext_body = H_tagged("dac/ext", ext.nym_d.to_bytes(params.n_bytes, "big"),
                            attrs_digest(ext.attrs), bytes([ext.level]), b"\x01")
        if not sgn_verify(params.cert_group, vk, ext_body, ext.ext_sig):
            return False
        ext_part = H_tagged("dac/extpart", ext.vk_bytes, ext.cert, ext.ext_sig,
                            ext.nym_d.to_bytes(params.n_bytes, "big"),
                            attrs_digest(ext.attrs), bytes([ext.level]))
        T_ext = (pow(params.base_sk, pres.z_u, n) * pow(params.base_S, ext.z_rd, n)
                 * pow(ext.nym_d, -pres.c, n)) % n

    c = _show_challenge(params, pres.level, pres.nym, pres.sigma_r,
                        pres.disclosed, context, payload, T_V, T_nym,
                        ext_part, T_ext)
    return c == pres.c


# -- delegation ------------------------------------------------------------

@dataclass(frozen=True)
class DelegationRequest:
    nym_d: int
    c: int
    z_u: int
    z_r: int


def dac_request_delegation(params: DacParams, sk: int,
                           rng: SeededRng) -> tuple[DelegationRequest, int]:
    """Recipient side: one-time pseudonym nym_d plus opening proof."""
    n = params.n
    r_d = rng.randint_bits(_SECRET_BITS) | 1
    nym_d = (pow(params.base_sk, sk, n) * pow(params.base_S, r_d, n)) % n
    width = _SECRET_BITS + _CHAL_BITS + _SLACK_BITS
    k_u, k_r = rng.randint_bits(width), rng.randint_bits(width)
    T = (pow(params.base_sk, k_u, n) * pow(params.base_S, k_r, n)) % n
    c = H_int("dac/delegate", params.fingerprint(),
              nym_d.to_bytes(params.n_bytes, "big"),
              T.to_bytes(params.n_bytes, "big")) >> (256 - _CHAL_BITS)
    return DelegationRequest(nym_d, c, k_u + c * sk, k_r + c * r_d), r_d


def dac_issue_cred(params: DacParams, delegator: Credential,
                   request: DelegationRequest, attrs: tuple[Attribute, ...],
                   level: int, rng: SeededRng,
                   terminal: bool = True) -> tuple[bytes, bytes, bytes]:
    """Delegator side of IssueCred: sign the extension for the recipient.

    Returns (vk, cert, ext_sig); raises if the delegator's key is missing
    (dk = None is terminal) or the requested level exceeds its bound.
    """
    if delegator.dk is None or delegator.dk.secret is None:
        raise CryptoError("credential is terminal: no delegation key")
    if level > delegator.dk.max_level:
        raise CryptoError("delegation beyond authorized level")
    if level != delegator.level + 1 or level > params.eta:
        raise CryptoError("invalid delegation level")
    if not terminal:
        raise CryptoError("non-terminal re-delegation is not supported")
    if len(attrs) > params.t:
        raise ParameterError("attribute extension exceeds bound t")
    n = params.n
    T = (pow(params.base_sk, request.z_u, n) * pow(params.base_S, request.z_r, n)
         * pow(request.nym_d, -request.c, n)) % n
    c = H_int("dac/delegate", params.fingerprint(),
              request.nym_d.to_bytes(params.n_bytes, "big"),
              T.to_bytes(params.n_bytes, "big")) >> (256 - _CHAL_BITS)
    if c != request.c:
        raise CryptoError("delegation request proof invalid")
    dk_key = SigningKey(params.cert_group,
                        delegator.dk.secret)
    ext_body = H_tagged("dac/ext", request.nym_d.to_bytes(params.n_bytes, "big"),
                        attrs_digest(attrs), bytes([level]), b"\x01")
    ext_sig = dk_key.sign(ext_body, rng)
    return delegator.dk.vk_bytes, delegator.dk.cert, ext_sig


def dac_receive_cred(params: DacParams, recipient: Credential, sk: int,
                     r_d: int, nym_d: int, attrs: tuple[Attribute, ...],
                     level: int, vk_bytes: bytes, cert: bytes,
                     ext_sig: bytes) -> DelegatedCredential:
    """Recipient side: check the chain root -> vk -> extension, keep dk = None."""
    vk = params.cert_group.from_bytes(vk_bytes)
    cert_body = H_tagged("dac/dkcert", vk_bytes, bytes([level]))
    if not sgn_verify(params.cert_group, params.cert_pk, cert_body, cert):
        raise CryptoError("delegation key certificate invalid")
    ext_body = H_tagged("dac/ext", nym_d.to_bytes(params.n_bytes, "big"),
                        attrs_digest(attrs), bytes([level]), b"\x01")
    if not sgn_verify(params.cert_group, vk, ext_body, ext_sig):
        raise CryptoError("extension signature invalid")
    return DelegatedCredential(level=level, attrs=attrs, nym_d=nym_d, r_d=r_d,
                               vk_bytes=vk_bytes, cert=cert, ext_sig=ext_sig,
                               base=recipient, dk=None)


# -- fixed-size wire encoding ----------------------------------------------

def encode_credential(cred: Credential | DelegatedCredential,
                      params: DacParams) -> bytes:
    out = bytearray()
    if isinstance(cred, Credential):
        out += bytes([1, cred.level, 1 if cred.dk else 0])
        out += cred.sigma.to_bytes(params.n_bytes, "big")
        if cred.dk is not None:
            out += cred.dk.vk_bytes + cred.dk.cert + bytes([cred.dk.max_level])
    else:
        out += bytes([2, cred.level, 0])
        out += cred.vk_bytes + cred.cert + cred.ext_sig
        out += H_tagged("dac/nymd", cred.nym_d.to_bytes(params.n_bytes, "big"))[:16]
        out += attrs_digest(cred.attrs)
    if len(out) > CRED_WIRE_BYTES:
        raise CryptoError(f"credential encoding exceeds {CRED_WIRE_BYTES} bytes")
    return bytes(out) + b"\x00" * (CRED_WIRE_BYTES - len(out))
