"""Spectrum geolocation database: grid-indexed availability records.

Records are indexed by cell coordinates quantized to the grid resolution
and encode to exactly 560 bytes. The database persists as a 4-byte
length-prefixed JSON header (origin, resolution, area) followed by the
fixed-size records in row-major cell order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ProtocolReject, RejectReason, SlapxError
from .hashes import H_int

RECORD_BYTES = 560
_CHANNEL_BYTES = 10  # freq_hz u64 + max_eirp deci-dBm i16
_MAX_CHANNELS = 52


@dataclass(frozen=True)
class Channel:
    freq_hz: int
    max_eirp_dbm: float


@dataclass(frozen=True)
class SpectrumRecord:
    cell_x: float
    cell_y: float
    valid_from: int
    valid_until: int
    max_devices: int
    device_mask: int
    channels: tuple[Channel, ...]

    def encode(self) -> bytes:
        if len(self.channels) > _MAX_CHANNELS:
            raise SlapxError("too many channels for fixed record")
        out = bytearray()
        out += int(round(self.cell_x * 1000)).to_bytes(8, "big", signed=True)
        out += int(round(self.cell_y * 1000)).to_bytes(8, "big", signed=True)
        out += self.valid_from.to_bytes(8, "big")
        out += self.valid_until.to_bytes(8, "big")
        out += self.max_devices.to_bytes(2, "big")
        out += bytes([self.device_mask])
        out += len(self.channels).to_bytes(2, "big")
        for ch in self.channels:
            out += ch.freq_hz.to_bytes(8, "big")
            out += int(round(ch.max_eirp_dbm * 10)).to_bytes(2, "big", signed=True)
        return bytes(out) + b"\x00" * (RECORD_BYTES - len(out))

    @classmethod
    def decode(cls, data: bytes) -> "SpectrumRecord":
        if len(data) != RECORD_BYTES:
            raise SlapxError("bad record length")
        cell_x = int.from_bytes(data[0:8], "big", signed=True) / 1000
        cell_y = int.from_bytes(data[8:16], "big", signed=True) / 1000
        valid_from = int.from_bytes(data[16:24], "big")
        valid_until = int.from_bytes(data[24:32], "big")
        max_devices = int.from_bytes(data[32:34], "big")
        device_mask = data[34]
        count = int.from_bytes(data[35:37], "big")
        channels = []
        off = 37
        for _ in range(count):
            freq = int.from_bytes(data[off:off + 8], "big")
            eirp = int.from_bytes(data[off + 8:off + 10], "big", signed=True) / 10
            channels.append(Channel(freq, eirp))
            off += _CHANNEL_BYTES
        return cls(cell_x, cell_y, valid_from, valid_until,
                   max_devices, device_mask, tuple(channels))


class SpectrumDatabase:
    """Service-area grid; records synthesized deterministically per cell."""

    def __init__(self, origin: tuple[float, float] = (0.0, 0.0),
                 resolution_m: float = 50.0,
                 width_m: float = 10_000.0, height_m: float = 10_000.0,
                 seed: int = 0):
        if resolution_m <= 0 or width_m <= 0 or height_m <= 0:
            raise SlapxError("degenerate service area")
        self.origin = origin
        self.resolution_m = resolution_m
        self.width_m = width_m
        self.height_m = height_m
        self.seed = seed
        self._records: dict[tuple[int, int], SpectrumRecord] = {}

    def cell_of(self, l_x: float, l_y: float) -> tuple[float, float]:
        x0, y0 = self.origin
        if not (x0 <= l_x < x0 + self.width_m and y0 <= l_y < y0 + self.height_m):
            raise ProtocolReject(RejectReason.OUT_OF_AREA,
                                 f"({l_x}, {l_y}) outside service area")
        res = self.resolution_m
        return (x0 + int((l_x - x0) // res) * res,
                y0 + int((l_y - y0) // res) * res)

    def lookup(self, l_x: float, l_y: float) -> SpectrumRecord:
        cx, cy = self.cell_of(l_x, l_y)
        key = (int(cx * 1000), int(cy * 1000))
        rec = self._records.get(key)
        if rec is None:
            rec = self._synthesize(cx, cy)
            self._records[key] = rec
        return rec

    def _synthesize(self, cx: float, cy: float) -> SpectrumRecord:
        h = H_int("spectrumdb", self.seed.to_bytes(8, "big"),
                  int(cx * 1000).to_bytes(8, "big", signed=True),
                  int(cy * 1000).to_bytes(8, "big", signed=True))
        n_ch = 4 + (h % 8)
        channels = []
        for i in range(n_ch):
            hi = H_int("spectrumdb/ch", h.to_bytes(32, "big"), i.to_bytes(2, "big"))
            freq = 3_550_000_000 + (hi % 150) * 1_000_000  # CBRS-like band
            eirp = 20.0 + (hi >> 16) % 200 / 10.0
            channels.append(Channel(freq, eirp))
        return SpectrumRecord(cell_x=cx, cell_y=cy,
                              valid_from=0, valid_until=2 ** 48,
                              max_devices=64, device_mask=0xFF,
                              channels=tuple(channels))

    # -- persistence ------------------------------------------------------

    def save(self, path: str) -> None:
        header = {"origin": list(self.origin), "resolution_m": self.resolution_m,
                  "width_m": self.width_m, "height_m": self.height_m,
                  "seed": self.seed, "records": len(self._records)}
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as f:
            f.write(len(blob).to_bytes(4, "big"))
            f.write(blob)
            for key in sorted(self._records):
                f.write(self._records[key].encode())

    @classmethod
    def load(cls, path: str) -> "SpectrumDatabase":
        with open(path, "rb") as f:
            hlen = int.from_bytes(f.read(4), "big")
            header = json.loads(f.read(hlen).decode())
            db = cls(origin=tuple(header["origin"]),
                     resolution_m=header["resolution_m"],
                     width_m=header["width_m"], height_m=header["height_m"],
                     seed=header["seed"])
            for _ in range(header["records"]):
                rec = SpectrumRecord.decode(f.read(RECORD_BYTES))
                db._records[(int(rec.cell_x * 1000), int(rec.cell_y * 1000))] = rec
        return db
