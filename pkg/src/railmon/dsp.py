"""FFT preprocessing and compression of raw waveforms.

A waveform segment is sliced into power-of-two windows, transformed to
one-sided magnitude spectra, and quantized to u16 codes with a per-frame
scale. The resulting SpectralFrame is the unit that travels over the
constrained uplink and lands in the ledger, so it carries two codecs:

* a compact binary form (``to_bytes``) used for storage and size
  accounting — the u16 code block is DEFLATE-compressed, which is what
  actually gets the payload under a quarter of the raw f32 size;
* a JSON wire form (``to_wire``) used by the HTTP gateway.

Phase is discarded: the downstream features only need magnitudes.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError, SizeError
from .simkit import WaveformSegment

DEFAULT_WINDOW_LEN = 1024
DEFAULT_HOP = 1024

CODE_MAX = 65535

WINDOW_KINDS = ("rect", "hann")

# canonical field order for the JSON wire form
_WIRE_FIELDS = ("sensor_id", "start_timestamp", "frame_index", "window_len",
                "hop", "sample_rate", "scale", "bins")


@dataclass
class SpectralFrame:
    sensor_id: str
    start_timestamp: int    # microseconds
    frame_index: int
    window_len: int
    hop: int
    sample_rate: int
    scale: float            # dequantized magnitude = code / 65535 * scale
    bins: np.ndarray        # uint16, length window_len/2 + 1

    @property
    def duration_us(self) -> int:
        return int(round(self.window_len / self.sample_rate * 1e6))

    def to_wire(self) -> dict:
        return {
            "sensor_id": self.sensor_id,
            "start_timestamp": self.start_timestamp,
            "frame_index": self.frame_index,
            "window_len": self.window_len,
            "hop": self.hop,
            "sample_rate": self.sample_rate,
            "scale": self.scale,
            "bins": [int(b) for b in self.bins],
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "SpectralFrame":
        missing = [f for f in _WIRE_FIELDS if f not in obj]
        if missing:
            raise ParameterError(f"frame object missing fields: {missing}")
        return cls(
            sensor_id=str(obj["sensor_id"]),
            start_timestamp=int(obj["start_timestamp"]),
            frame_index=int(obj["frame_index"]),
            window_len=int(obj["window_len"]),
            hop=int(obj["hop"]),
            sample_rate=int(obj["sample_rate"]),
            scale=float(obj["scale"]),
            bins=np.asarray(obj["bins"], dtype=np.uint16),
        )

    def to_bytes(self) -> bytes:
        sid = self.sensor_id.encode("utf-8")
        packed = zlib.compress(np.asarray(self.bins, dtype="<u2").tobytes(), 6)
        return b"".join([
            struct.pack("<I", len(sid)), sid,
            struct.pack("<QIIIIdI", self.start_timestamp, self.frame_index,
                        self.window_len, self.hop, self.sample_rate,
                        self.scale, len(self.bins)),
            struct.pack("<I", len(packed)), packed,
        ])

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SpectralFrame":
        (slen,) = struct.unpack_from("<I", blob, 0)
        off = 4
        sensor_id = blob[off:off + slen].decode("utf-8")
        off += slen
        ts, idx, window_len, hop, rate, scale, nbins = struct.unpack_from(
            "<QIIIIdI", blob, off)
        off += struct.calcsize("<QIIIIdI")
        (clen,) = struct.unpack_from("<I", blob, off)
        off += 4
        codes = np.frombuffer(zlib.decompress(blob[off:off + clen]), dtype="<u2")
        if len(codes) != nbins:
            raise ParameterError("frame code block length mismatch")
        return cls(sensor_id=sensor_id, start_timestamp=ts, frame_index=idx,
                   window_len=window_len, hop=hop, sample_rate=rate,
                   scale=scale, bins=codes.copy())


@dataclass
class FramedWaveform:
    """Raw analysis windows cut from one segment."""

    frames: np.ndarray   # shape (n_frames, window_len)
    window_len: int
    hop: int
    window: str
    too_short: bool      # segment shorter than one window -> zero frames


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def fft_magnitude(samples: Sequence[float]) -> np.ndarray:
    """One-sided magnitude spectrum |X[k]| for k = 0..N/2, N a power of two."""
    x = np.asarray(samples, dtype=np.float64)
    n = len(x)
    if n < 2 or not _is_power_of_two(n):
        raise SizeError(f"length {n} is not a power of two >= 2")
    return np.abs(np.fft.rfft(x))


def window_values(kind: str, window_len: int) -> np.ndarray:
    if kind == "rect":
        return np.ones(window_len)
    if kind == "hann":
        return np.hanning(window_len)
    raise ParameterError(f"unknown window kind {kind!r}")


def frame_waveform(segment: WaveformSegment, window_len: int = DEFAULT_WINDOW_LEN,
                   hop: int = DEFAULT_HOP, window: str = "hann") -> FramedWaveform:
    """Slice a segment into tapered windows; a trailing partial window is dropped."""
    if hop < 1:
        raise ParameterError("hop must be >= 1")
    if window_len < 2 or not _is_power_of_two(window_len):
        raise SizeError(f"window_len {window_len} is not a power of two >= 2")
    taper = window_values(window, window_len)
    samples = np.asarray(segment.samples, dtype=np.float64)
    if len(samples) < window_len:
        return FramedWaveform(frames=np.empty((0, window_len)), window_len=window_len,
                              hop=hop, window=window, too_short=True)
    n_frames = (len(samples) - window_len) // hop + 1
    frames = np.stack([samples[i * hop:i * hop + window_len] * taper
                       for i in range(n_frames)])
    return FramedWaveform(frames=frames, window_len=window_len, hop=hop,
                          window=window, too_short=False)


def quantize(magnitudes: np.ndarray) -> tuple[float, np.ndarray]:
    """Linear u16 quantization with the frame maximum as scale."""
    peak = float(np.max(magnitudes)) if len(magnitudes) else 0.0
    scale = peak if peak > 0 else 1.0
    codes = np.round(magnitudes / scale * CODE_MAX).astype(np.uint16)
    return scale, codes


def dequantize(frame: SpectralFrame) -> np.ndarray:
    return frame.bins.astype(np.float64) / CODE_MAX * frame.scale


def compress(segment: WaveformSegment, window_len: int = DEFAULT_WINDOW_LEN,
             hop: int = DEFAULT_HOP, window: str = "hann") -> list[SpectralFrame]:
    """Transform a segment into quantized spectral frames."""
    framed = frame_waveform(segment, window_len, hop, window)
    out = []
    for i, frame in enumerate(framed.frames):
        scale, codes = quantize(fft_magnitude(frame))
        out.append(SpectralFrame(
            sensor_id=segment.sensor_id,
            start_timestamp=segment.start_timestamp
            + int(round(i * hop / segment.sample_rate * 1e6)),
            frame_index=i,
            window_len=window_len,
            hop=hop,
            sample_rate=segment.sample_rate,
            scale=scale,
            bins=codes,
        ))
    return out


def write_frames_jsonl(frames: Iterable[SpectralFrame], path: str) -> int:
    """One wire-form JSON object per line; returns the frame count."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(json.dumps(frame.to_wire()))
            fh.write("\n")
            count += 1
    return count


def read_frames_jsonl(path: str) -> list[SpectralFrame]:
    frames = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                frames.append(SpectralFrame.from_wire(json.loads(line)))
    return frames
