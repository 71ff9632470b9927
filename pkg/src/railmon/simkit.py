"""Deterministic synthetic structure-borne-noise sources.

Stands in for the two sensor installations of the monitored fleet: a
vehicle-mounted unit riding on the underbelly (continuous ride segments
with telemetry) and a track-embedded unit with two subunits that record a
vehicle passing the workshop approach. All generators are pure functions
of their arguments plus an integer seed, so identical calls produce
byte-identical output.

Signal model: broadband Gaussian noise confined below sample_rate/8 is the
healthy baseline. A wheel flat spot adds a train of exponentially decaying
impacts once per wheel revolution; a rail bump adds a single windowed tone
burst where the vehicle crosses it. Severity scales amplitude linearly and
severity zero injects nothing at all.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError, FaultSpecError

# Fixed simulation origin: a rural branch line heading due north.
GPS_ORIGIN_LAT = 51.6758
GPS_ORIGIN_LON = 8.3459
METERS_PER_DEG_LAT = 111_320.0

DEFAULT_EPOCH_US = 1_700_000_000_000_000  # fixed start so runs are reproducible

NOISE_CUTOFF_FRACTION = 1.0 / 8.0
FAULT_BASE_AMPLITUDE = 6.0      # relative to unit-RMS base noise
FLAT_SPOT_DECAY_S = 0.004
RAIL_BUMP_DURATION_S = 0.06
RAIL_BUMP_TONE_FRACTION = 0.3   # tone frequency as a fraction of sample_rate

PASS_BURST_DURATION_S = 0.5
PASS_MARGIN_S = 0.25


class FaultKind(str, Enum):
    NONE = "none"
    FLAT_SPOT = "flat_spot"
    RAIL_BUMP = "rail_bump"


class PassDirection(str, Enum):
    A_TO_B = "a_to_b"
    B_TO_A = "b_to_a"


@dataclass(frozen=True)
class FaultSpec:
    """One injected defect. severity 0 is an exact no-op."""

    kind: FaultKind
    severity: float = 0.0
    wheel_circumference: Optional[float] = None  # flat_spot only, meters
    position: Optional[float] = None             # rail_bump only, meters along route


@dataclass(frozen=True)
class VehicleTelemetry:
    timestamp: int          # microseconds since epoch
    gps_lat: float          # degrees
    gps_lon: float          # degrees
    temperature: float      # Celsius
    accel_x: float          # m/s^2
    accel_y: float
    accel_z: float
    roll: float             # radians
    pitch: float
    yaw: float


@dataclass
class WaveformSegment:
    sensor_id: str
    start_timestamp: int    # microseconds
    sample_rate: int        # Hz
    samples: np.ndarray     # float32
    telemetry: VehicleTelemetry

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class TrackPassEvent:
    pass_id: str
    subunit_a_waveform: WaveformSegment
    subunit_b_waveform: WaveformSegment
    subunit_spacing: float  # meters
    true_direction: PassDirection
    true_speed: float       # m/s
    temperature: float
    timestamp: int


@dataclass(frozen=True)
class ArchiveManifest:
    path: str
    segment_count: int
    digest: str  # sha256 of the archive file bytes


def _lowpass_noise(rng: np.random.Generator, n: int, sample_rate: float) -> np.ndarray:
    """Unit-RMS Gaussian noise with spectral content below sample_rate/8."""
    x = rng.standard_normal(n)
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spec[freqs > sample_rate * NOISE_CUTOFF_FRACTION] = 0.0
    y = np.fft.irfft(spec, n)
    std = y.std()
    return y / std if std > 0 else y


def _flat_spot_signature(n: int, sample_rate: int, speed: float,
                         fault: FaultSpec) -> np.ndarray:
    if fault.wheel_circumference is None:
        raise FaultSpecError("flat_spot fault requires wheel_circumference")
    if fault.wheel_circumference <= 0:
        raise FaultSpecError("wheel_circumference must be positive")
    period_s = fault.wheel_circumference / speed
    decay_n = max(1, int(round(6 * FLAT_SPOT_DECAY_S * sample_rate)))
    impulse = fault.severity * FAULT_BASE_AMPLITUDE * np.exp(
        -np.arange(decay_n) / (FLAT_SPOT_DECAY_S * sample_rate))
    sig = np.zeros(n)
    j = 0
    while True:
        n0 = int(round(j * period_s * sample_rate))
        j += 1
        if n0 >= n:
            break
        cut = min(decay_n, n - n0)
        sig[n0:n0 + cut] += impulse[:cut]
    return sig


def _rail_bump_signature(n: int, sample_rate: int, speed: float,
                         route_length: float, fault: FaultSpec) -> np.ndarray:
    if fault.position is None:
        raise FaultSpecError("rail_bump fault requires position")
    if not 0.0 <= fault.position <= route_length:
        raise FaultSpecError("rail_bump position outside the route")
    center_n = int(round(fault.position / speed * sample_rate))
    burst_n = max(2, int(round(RAIL_BUMP_DURATION_S * sample_rate)))
    t = np.arange(burst_n)
    tone = np.sin(2 * np.pi * RAIL_BUMP_TONE_FRACTION * t)
    burst = fault.severity * FAULT_BASE_AMPLITUDE * np.hanning(burst_n) * tone
    sig = np.zeros(n)
    start = center_n - burst_n // 2
    lo = max(0, start)
    hi = min(n, start + burst_n)
    if hi > lo:
        sig[lo:hi] += burst[lo - start:hi - start]
    return sig


def _validate_fault(fault: FaultSpec) -> None:
    if not isinstance(fault.kind, FaultKind):
        raise FaultSpecError(f"unknown fault kind {fault.kind!r}")
    if not 0.0 <= fault.severity <= 1.0:
        raise FaultSpecError("severity must lie in [0, 1]")
    if fault.kind is FaultKind.FLAT_SPOT and fault.wheel_circumference is None:
        raise FaultSpecError("flat_spot fault requires wheel_circumference")
    if fault.kind is FaultKind.RAIL_BUMP and fault.position is None:
        raise FaultSpecError("rail_bump fault requires position")


def vehicle_of_sensor(sensor_id: str) -> str:
    """Sensor ids follow '<vehicle_id>:<unit>'; the prefix is the vehicle."""
    return sensor_id.split(":", 1)[0]


def simulate_ride(route_length: float, speed: float, sample_rate: int,
                  segment_duration: float, faults: Sequence[FaultSpec] = (),
                  seed: int = 0, *, sensor_id: str = "V1:ub1",
                  start_timestamp: int = DEFAULT_EPOCH_US,
                  temperature: float = 15.0) -> list[WaveformSegment]:
    """Generate the underbelly sensor's segments for one ride.

    Segments tile the ride without gaps; the last segment may extend past
    route_length to keep every segment the same length. Telemetry advances
    due north at the commanded speed.
    """
    if route_length <= 0 or speed <= 0 or sample_rate <= 0 or segment_duration <= 0:
        raise ParameterError("route_length, speed, sample_rate and "
                             "segment_duration must be positive")
    for fault in faults:
        _validate_fault(fault)

    seg_len = int(round(segment_duration * sample_rate))
    if seg_len < 2:
        raise ParameterError("segment_duration too short for the sample rate")
    n_segments = max(1, math.ceil(route_length / (speed * segment_duration)))
    total = n_segments * seg_len

    rng = np.random.default_rng([seed, 0])
    base = _lowpass_noise(rng, total, sample_rate)

    active = [f for f in faults if f.kind is not FaultKind.NONE and f.severity > 0]
    if active:
        injected = np.zeros(total)
        for fault in active:
            if fault.kind is FaultKind.FLAT_SPOT:
                injected += _flat_spot_signature(total, sample_rate, speed, fault)
            else:
                injected += _rail_bump_signature(total, sample_rate, speed,
                                                 route_length, fault)
        signal = base + injected
    else:
        signal = base

    samples = signal.astype(np.float32)
    segments = []
    for i in range(n_segments):
        t_s = i * seg_len / sample_rate  # exact segment start in seconds
        telemetry = VehicleTelemetry(
            timestamp=start_timestamp + int(round(t_s * 1e6)),
            gps_lat=GPS_ORIGIN_LAT + speed * t_s / METERS_PER_DEG_LAT,
            gps_lon=GPS_ORIGIN_LON,
            temperature=temperature,
            accel_x=0.02 * math.sin(0.37 * i),
            accel_y=0.02 * math.cos(0.23 * i),
            accel_z=9.81,
            roll=0.005 * math.sin(0.11 * i),
            pitch=0.003 * math.cos(0.17 * i),
            yaw=0.0,
        )
        segments.append(WaveformSegment(
            sensor_id=sensor_id,
            start_timestamp=telemetry.timestamp,
            sample_rate=sample_rate,
            samples=samples[i * seg_len:(i + 1) * seg_len],
            telemetry=telemetry,
        ))
    return segments


def simulate_track_pass(speed: float, subunit_spacing: float,
                        direction: PassDirection = PassDirection.A_TO_B,
                        fault: Optional[FaultSpec] = None,
                        sample_rate: int = 8192, noise_level: float = 0.0,
                        seed: int = 0, *, sensor_id: str = "trk1",
                        timestamp: int = DEFAULT_EPOCH_US,
                        temperature: float = 15.0) -> TrackPassEvent:
    """Generate one vehicle pass over the two track subunits.

    Both subunits observe the same burst; the later one lags by
    subunit_spacing/speed seconds (quantized to the sample grid). Only
    vehicle-borne faults make sense here, so rail_bump specs are rejected.
    """
    if speed <= 0 or subunit_spacing <= 0 or sample_rate <= 0:
        raise ParameterError("speed, subunit_spacing and sample_rate must be positive")
    if noise_level < 0:
        raise ParameterError("noise_level must be non-negative")
    direction = PassDirection(direction)
    if fault is not None:
        _validate_fault(fault)
        if fault.kind is FaultKind.RAIL_BUMP:
            raise FaultSpecError("rail_bump does not apply to a track pass")

    delay_n = int(round(subunit_spacing / speed * sample_rate))
    burst_n = int(round(PASS_BURST_DURATION_S * sample_rate))
    margin_n = int(round(PASS_MARGIN_S * sample_rate))
    total = margin_n + delay_n + burst_n + margin_n

    rng_burst = np.random.default_rng([seed, 0])
    burst = _lowpass_noise(rng_burst, burst_n, sample_rate) * np.hanning(burst_n)
    if fault is not None and fault.kind is FaultKind.FLAT_SPOT and fault.severity > 0:
        burst += _flat_spot_signature(burst_n, sample_rate, speed, fault) \
            * np.hanning(burst_n)
    rms = np.sqrt(np.mean(burst ** 2))
    if rms > 0:
        burst = burst / rms  # unit RMS over the burst support

    first = np.zeros(total)
    second = np.zeros(total)
    first[margin_n:margin_n + burst_n] += burst
    second[margin_n + delay_n:margin_n + delay_n + burst_n] += burst

    if direction is PassDirection.A_TO_B:
        chan_a, chan_b = first, second
    else:
        chan_a, chan_b = second, first

    if noise_level > 0:
        chan_a = chan_a + noise_level * np.random.default_rng([seed, 1]).standard_normal(total)
        chan_b = chan_b + noise_level * np.random.default_rng([seed, 2]).standard_normal(total)

    def _subunit(tag: str, samples: np.ndarray) -> WaveformSegment:
        telemetry = VehicleTelemetry(
            timestamp=timestamp, gps_lat=GPS_ORIGIN_LAT, gps_lon=GPS_ORIGIN_LON,
            temperature=temperature, accel_x=0.0, accel_y=0.0, accel_z=0.0,
            roll=0.0, pitch=0.0, yaw=0.0)
        return WaveformSegment(
            sensor_id=f"{sensor_id}:{tag}", start_timestamp=timestamp,
            sample_rate=sample_rate, samples=samples.astype(np.float32),
            telemetry=telemetry)

    return TrackPassEvent(
        pass_id=f"pass-{seed:08x}",
        subunit_a_waveform=_subunit("a", chan_a),
        subunit_b_waveform=_subunit("b", chan_b),
        subunit_spacing=subunit_spacing,
        true_direction=direction,
        true_speed=speed,
        temperature=temperature,
        timestamp=timestamp,
    )


# --- raw archive ------------------------------------------------------------
#
# Binary layout (little-endian), the weekly-retrieval stand-in:
#   magic "RSRAW1"
#   u32 segment count
#   per segment:
#     u32 sensor_id length, sensor_id bytes (utf-8)
#     u64 start_timestamp, u32 sample_rate, u32 sample count
#     f32 samples
#     10 x f64 telemetry fields in VehicleTelemetry declaration order

ARCHIVE_MAGIC = b"RSRAW1"

_TELEMETRY_FIELDS = ("timestamp", "gps_lat", "gps_lon", "temperature",
                     "accel_x", "accel_y", "accel_z", "roll", "pitch", "yaw")


def export_raw_archive(segments: Sequence[WaveformSegment], path: str) -> ArchiveManifest:
    """Write segments to a raw archive file and return its manifest."""
    chunks = [ARCHIVE_MAGIC, struct.pack("<I", len(segments))]
    for seg in segments:
        sid = seg.sensor_id.encode("utf-8")
        chunks.append(struct.pack("<I", len(sid)))
        chunks.append(sid)
        chunks.append(struct.pack("<QII", seg.start_timestamp, seg.sample_rate,
                                  len(seg.samples)))
        chunks.append(np.asarray(seg.samples, dtype="<f4").tobytes())
        tel = seg.telemetry
        chunks.append(struct.pack("<10d", *[float(getattr(tel, f))
                                            for f in _TELEMETRY_FIELDS]))
    blob = b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(blob)
    return ArchiveManifest(path=str(path), segment_count=len(segments),
                           digest=hashlib.sha256(blob).hexdigest())


def load_raw_archive(path: str) -> list[WaveformSegment]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(ARCHIVE_MAGIC)] != ARCHIVE_MAGIC:
        raise ParameterError(f"{path} is not a raw archive")
    off = len(ARCHIVE_MAGIC)
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    segments = []
    for _ in range(count):
        (slen,) = struct.unpack_from("<I", blob, off)
        off += 4
        sensor_id = blob[off:off + slen].decode("utf-8")
        off += slen
        start_ts, rate, n = struct.unpack_from("<QII", blob, off)
        off += 16
        samples = np.frombuffer(blob, dtype="<f4", count=n, offset=off).copy()
        off += 4 * n
        values = struct.unpack_from("<10d", blob, off)
        off += 80
        telemetry = VehicleTelemetry(timestamp=int(values[0]),
                                     **dict(zip(_TELEMETRY_FIELDS[1:], values[1:])))
        segments.append(WaveformSegment(sensor_id=sensor_id, start_timestamp=start_ts,
                                        sample_rate=rate, samples=samples,
                                        telemetry=telemetry))
    return segments
