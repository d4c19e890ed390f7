"""Typed, length-prefixed protocol messages with byte-exact payload sizes.

Framing: 1-byte type tag || 4-byte big-endian payload length || payload.
Each protocol phase has a fixed payload size per direction; content is
length-prefixed internally and zero-padded up to the budget, so the four
phase totals are constant:

    PoL.AP    1040 + 1416 = 2456 bytes
    PoL.ND    1160 +  784 = 1944 bytes
    Spectrum  1720 + 1296 = 3016 bytes
    Service   2080 +  632 = 2712 bytes

At the standard 1500-byte MTU with 40 bytes of IP+TCP headers only the two
request messages above 1460 bytes (spectrum and service) split into two
packets; every response fits a single packet.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ParameterError, SlapxError

HEADER_LEN = 5  # framing: type byte + u32 payload length


class MessageType(enum.IntEnum):
    POL_REQUEST = 1
    POL_RESPONSE = 2
    SPECTRUM_REQUEST = 3
    SPECTRUM_RESPONSE = 4
    SERVICE_REQUEST = 5
    SERVICE_RESPONSE = 6


# catalogue name -> (type tag, fixed payload bytes)
MESSAGE_CATALOG: dict[str, tuple[MessageType, int]] = {
    "pol_ap_request": (MessageType.POL_REQUEST, 1040),
    "pol_ap_response": (MessageType.POL_RESPONSE, 1416),
    "pol_nd_request": (MessageType.POL_REQUEST, 1160),
    "pol_nd_response": (MessageType.POL_RESPONSE, 784),
    "spectrum_request": (MessageType.SPECTRUM_REQUEST, 1720),
    "spectrum_response": (MessageType.SPECTRUM_RESPONSE, 1296),
    "service_request": (MessageType.SERVICE_REQUEST, 2080),
    "service_response": (MessageType.SERVICE_RESPONSE, 632),
}

PHASE_MESSAGES = {
    "pol_ap": ("pol_ap_request", "pol_ap_response"),
    "pol_nd": ("pol_nd_request", "pol_nd_response"),
    "spectrum_query": ("spectrum_request", "spectrum_response"),
    "service_request": ("service_request", "service_response"),
}


def phase_total(phase: str) -> int:
    return sum(MESSAGE_CATALOG[m][1] for m in PHASE_MESSAGES[phase])


@dataclass(frozen=True)
class WireMessage:
    type: MessageType
    payload: bytes

    def encode(self) -> bytes:
        return bytes([self.type]) + len(self.payload).to_bytes(4, "big") + self.payload


def build_message(catalog_name: str, content: bytes) -> WireMessage:
    mtype, budget = MESSAGE_CATALOG[catalog_name]
    if len(content) + 4 > budget:
        raise SlapxError(
            f"{catalog_name} content {len(content)}B exceeds its {budget}B budget")
    payload = len(content).to_bytes(4, "big") + content
    return WireMessage(mtype, payload + b"\x00" * (budget - len(payload)))


def message_content(msg: WireMessage) -> bytes:
    clen = int.from_bytes(msg.payload[:4], "big")
    return msg.payload[4:4 + clen]


def decode_message(data: bytes) -> tuple[WireMessage, bytes]:
    """Parse one framed message from a byte stream; returns (message, rest)."""
    if len(data) < HEADER_LEN:
        raise SlapxError("short frame")
    mtype = MessageType(data[0])
    plen = int.from_bytes(data[1:5], "big")
    if len(data) < HEADER_LEN + plen:
        raise SlapxError("truncated frame")
    return WireMessage(mtype, data[5:5 + plen]), data[5 + plen:]


# -- field packing helpers -------------------------------------------------

def pack_fields(*fields: bytes) -> bytes:
    out = bytearray()
    for f in fields:
        out += len(f).to_bytes(2, "big") + f
    return bytes(out)


def unpack_fields(data: bytes, count: int) -> list[bytes]:
    out = []
    off = 0
    for _ in range(count):
        if off + 2 > len(data):
            raise SlapxError("truncated field")
        ln = int.from_bytes(data[off:off + 2], "big")
        off += 2
        if off + ln > len(data):
            raise SlapxError("truncated field")
        out.append(data[off:off + ln])
        off += ln
    return out


# -- fragmentation accounting -----------------------------------------------

@dataclass(frozen=True)
class FragEntry:
    message: str
    payload_bytes: int
    header_bytes: int
    packets: int
    overhead_ratio: float


def packet_count(payload: int, mtu: int, header_bytes: int) -> int:
    if mtu <= header_bytes:
        raise ParameterError("MTU must exceed header size")
    return max(1, math.ceil(payload / (mtu - header_bytes)))


def fragmentation_report(mtu: int, header_bytes: int = 40) -> list[FragEntry]:
    out = []
    for name, (_, size) in MESSAGE_CATALOG.items():
        pkts = packet_count(size, mtu, header_bytes)
        headers = pkts * header_bytes
        out.append(FragEntry(name, size, headers, pkts,
                             headers / (headers + size)))
    return out


def fragmentation_sweep(mtu_min: int = 576, mtu_max: int = 9000,
                        header_bytes: int = 40,
                        step: int = 1) -> dict[int, list[FragEntry]]:
    if mtu_min <= header_bytes:
        raise ParameterError("MTU floor must exceed header size")
    if mtu_max < mtu_min:
        raise ParameterError("invalid MTU range")
    return {mtu: fragmentation_report(mtu, header_bytes)
            for mtu in range(mtu_min, mtu_max + 1, step)}
