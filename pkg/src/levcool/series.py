"""Uniformly sampled multi-channel records and their on-disk formats.

CSV layout: an optional ``# key=value`` comment line carrying the unit,
then a header row ``time_s,<channel>,...`` and one row per sample.

Binary layout (all little-endian)::

    magic        4 bytes   b"LVTS"
    version      uint16    1
    sample_rate  float64   Hz
    unit         uint16 length + utf-8 bytes
    n_channels   uint32
    names        n_channels x (uint16 length + utf-8 bytes)
    n_samples    uint64
    data         float64[n_channels, n_samples], channel-major
"""

from __future__ import annotations

import io
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["TimeSeries", "atomic_write_bytes", "atomic_write_text", "CHANNELS"]

CHANNELS = ("true_position", "measured_position", "feedback_force")
_MAGIC = b"LVTS"
_VERSION = 1


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@dataclass
class TimeSeries:
    sample_rate: float
    channels: dict[str, np.ndarray]
    unit: str = "m"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        self.channels = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise ValueError(f"channels have unequal lengths {sorted(lengths)}")

    def __len__(self):
        return len(next(iter(self.channels.values()))) if self.channels else 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def tail(self, fraction: float) -> "TimeSeries":
        """The last ``fraction`` of the record (used to drop start-up transients)."""
        start = int(round(len(self) * (1 - fraction)))
        return TimeSeries(
            self.sample_rate,
            {k: v[start:] for k, v in self.channels.items()},
            self.unit,
            dict(self.metadata),
        )

    # -- CSV ---------------------------------------------------------------

    def to_csv_text(self) -> str:
        names = list(self.channels)
        buf = io.StringIO()
        buf.write(f"# unit={self.unit} sample_rate={self.sample_rate!r}\n")
        data = np.column_stack([self.times] + [self.channels[n] for n in names])
        np.savetxt(buf, data, delimiter=",", header=",".join(["time_s"] + names), comments="", fmt="%.17g")
        return buf.getvalue()

    def to_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv_text())

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        unit, rate = "m", None
        lines = Path(path).read_text().splitlines()
        body = []
        for line in lines:
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "unit":
                        unit = val
                    elif key == "sample_rate":
                        rate = float(val)
            else:
                body.append(line)
        header = body[0].split(",")
        if header[0] != "time_s":
            raise ValueError(f"{path}: first column must be time_s")
        data = np.loadtxt(body[1:], delimiter=",", ndmin=2)
        if rate is None:
            rate = 1.0 / float(np.mean(np.diff(data[:, 0])))
        return cls(rate, {name: data[:, i + 1] for i, name in enumerate(header[1:])}, unit)

    # -- binary ------------------------------------------------------------

    def to_bytes(self) -> bytes:
        out = [_MAGIC, struct.pack("<Hd", _VERSION, self.sample_rate)]
        unit = self.unit.encode()
        out.append(struct.pack("<H", len(unit)) + unit)
        out.append(struct.pack("<I", len(self.channels)))
        for name in self.channels:
            b = name.encode()
            out.append(struct.pack("<H", len(b)) + b)
        out.append(struct.pack("<Q", len(self)))
        for v in self.channels.values():
            out.append(np.ascontiguousarray(v, dtype="<f8").tobytes())
        return b"".join(out)

    def to_binary(self, path) -> None:
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "TimeSeries":
        if data[:4] != _MAGIC:
            raise ValueError("not a time-series file (bad magic)")
        version, rate = struct.unpack_from("<Hd", data, 4)
        if version != _VERSION:
            raise ValueError(f"unsupported version {version}")
        pos = 14
        (n,) = struct.unpack_from("<H", data, pos)
        unit = data[pos + 2 : pos + 2 + n].decode()
        pos += 2 + n
        (nch,) = struct.unpack_from("<I", data, pos)
        pos += 4
        names = []
        for _ in range(nch):
            (n,) = struct.unpack_from("<H", data, pos)
            names.append(data[pos + 2 : pos + 2 + n].decode())
            pos += 2 + n
        (ns,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        arr = np.frombuffer(data, dtype="<f8", count=nch * ns, offset=pos).reshape(nch, ns)
        return cls(rate, {name: arr[i].copy() for i, name in enumerate(names)}, unit)

    @classmethod
    def from_binary(cls, path) -> "TimeSeries":
        return cls.from_bytes(Path(path).read_bytes())

    @classmethod
    def load(cls, path) -> "TimeSeries":
        """Load either format, sniffing the magic bytes."""
        with open(path, "rb") as fh:
            head = fh.read(4)
        return cls.from_binary(path) if head == _MAGIC else cls.from_csv(path)
