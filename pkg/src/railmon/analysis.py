"""Spectral feature extraction, baselines, direction detection and the
nearest-centroid classifier that turns labeled frames into recommendations.

All numeric work happens on dequantized magnitudes, so results are stable
across the compress/ingest round trip. Models are immutable values with a
content fingerprint binding every published recommendation to the exact
model that produced it.
"""

from __future__ import annotations

import hashlib
import json
import time
import uuid
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import dsp
from .errors import (IndeterminateDirectionError, InsufficientDataError,
                     ParameterError, UnknownReferenceError, ValidationError)
from .ledger import Ledger
from .simkit import PassDirection, TrackPassEvent

N_BANDS = 8
ROLLOFF_FRACTION = 0.95
STD_EPS = 1e-9
# floor for band-energy ratios so logs stay finite on degenerate sets
ENERGY_FLOOR = 1e-30
DEFAULT_ANOMALY_THRESHOLD = 4.0
ENVELOPE_WINDOW_FRACTION = 100  # smoothing window = sample_rate / 100
REC_KEY_PREFIX = "recommendations/"

FrameRef = tuple[str, int]


@dataclass(frozen=True)
class FeatureVector:
    band_energy: tuple[float, ...]       # 8 bands, mean squared magnitude
    spectral_centroid: float             # Hz
    spectral_rolloff_95: float           # Hz
    peak_bins: tuple[int, ...]           # top-3 bin indices
    frame_ref: Optional[FrameRef] = None

    def scalars(self) -> np.ndarray:
        """The 10 model features: 8 band energies, centroid, rolloff."""
        return np.array(list(self.band_energy)
                        + [self.spectral_centroid, self.spectral_rolloff_95],
                        dtype=np.float64)


@dataclass(frozen=True)
class BaselineModel:
    sensor_id: str
    feature_mean: tuple[float, ...]
    feature_std: tuple[float, ...]
    n_frames: int

    def to_json(self) -> dict:
        return {"kind": "baseline", "sensor_id": self.sensor_id,
                "feature_mean": list(self.feature_mean),
                "feature_std": list(self.feature_std),
                "n_frames": self.n_frames}

    @classmethod
    def from_json(cls, obj: dict) -> "BaselineModel":
        return cls(sensor_id=str(obj["sensor_id"]),
                   feature_mean=tuple(float(v) for v in obj["feature_mean"]),
                   feature_std=tuple(float(v) for v in obj["feature_std"]),
                   n_frames=int(obj["n_frames"]))


@dataclass(frozen=True)
class ClassifierModel:
    classes: tuple[str, ...]
    centroids: tuple[tuple[float, ...], ...]  # standardized space, per class
    feature_mean: tuple[float, ...]
    feature_std: tuple[float, ...]            # epsilon-floored, > 0

    def to_json(self) -> dict:
        return {"kind": "classifier", "classes": list(self.classes),
                "centroids": [list(c) for c in self.centroids],
                "feature_mean": list(self.feature_mean),
                "feature_std": list(self.feature_std)}

    @classmethod
    def from_json(cls, obj: dict) -> "ClassifierModel":
        return cls(classes=tuple(str(c) for c in obj["classes"]),
                   centroids=tuple(tuple(float(v) for v in c)
                                   for c in obj["centroids"]),
                   feature_mean=tuple(float(v) for v in obj["feature_mean"]),
                   feature_std=tuple(float(v) for v in obj["feature_std"]))


@dataclass(frozen=True)
class PredictionCandidate:
    predicted: str
    confidence: float
    distances: tuple[float, ...]  # aligned with model.classes


@dataclass(frozen=True)
class DirectionEstimate:
    direction: PassDirection
    delta_t: float        # seconds, onset of B minus onset of A
    speed_estimate: float  # m/s


@dataclass(frozen=True)
class PrePostReport:
    band_ratio: tuple[float, ...]  # post/pre mean band energy, 8 values
    delta_score: float             # max |log2 ratio|

    def to_json(self) -> dict:
        return {"band_ratio": list(self.band_ratio),
                "delta_score": self.delta_score}


@dataclass(frozen=True)
class Recommendation:
    rec_id: str
    subject: str
    predicted_issue: str
    confidence: float
    evidence: tuple[FrameRef, ...]
    created_at: int  # microseconds
    model_fingerprint: str

    def to_json(self) -> dict:
        return {"rec_id": self.rec_id, "subject": self.subject,
                "predicted_issue": self.predicted_issue,
                "confidence": self.confidence,
                "evidence": [[k, v] for k, v in self.evidence],
                "created_at": self.created_at,
                "model_fingerprint": self.model_fingerprint}

    @classmethod
    def from_json(cls, obj: dict) -> "Recommendation":
        return cls(rec_id=str(obj["rec_id"]), subject=str(obj["subject"]),
                   predicted_issue=str(obj["predicted_issue"]),
                   confidence=float(obj["confidence"]),
                   evidence=tuple((str(k), int(v)) for k, v in obj["evidence"]),
                   created_at=int(obj["created_at"]),
                   model_fingerprint=str(obj["model_fingerprint"]))


# -- features ------------------------------------------------------------


def extract_features(frame: dsp.SpectralFrame,
                     frame_ref: Optional[FrameRef] = None) -> FeatureVector:
    mags = dsp.dequantize(frame)
    freqs = np.arange(len(mags)) * frame.sample_rate / frame.window_len
    energy = mags * mags

    total_mag = float(mags.sum())
    centroid = float((freqs * mags).sum() / total_mag) if total_mag > 0 else 0.0

    total_energy = float(energy.sum())
    if total_energy > 0:
        cum = np.cumsum(energy)
        rolloff = float(freqs[int(np.searchsorted(
            cum, ROLLOFF_FRACTION * total_energy))])
    else:
        rolloff = 0.0

    bands = []
    for group in np.array_split(energy[1:], N_BANDS):
        bands.append(float(group.mean()) if len(group) else 0.0)

    order = np.argsort(-mags, kind="stable")[:3]
    return FeatureVector(band_energy=tuple(bands), spectral_centroid=centroid,
                         spectral_rolloff_95=rolloff,
                         peak_bins=tuple(int(i) for i in order),
                         frame_ref=frame_ref)


def features_from_ledger(store: Ledger,
                         refs: Sequence[FrameRef]) -> list[FeatureVector]:
    out = []
    for key, version in refs:
        rec = store.get_version(key, version)
        if rec is None:
            raise UnknownReferenceError(f"no frame at {key!r} v{version}")
        frame = dsp.SpectralFrame.from_wire(json.loads(rec.payload))
        out.append(extract_features(frame, frame_ref=(key, version)))
    return out


# -- baseline / anomaly ----------------------------------------------------


def fit_baseline(sensor_id: str,
                 frames: Sequence[dsp.SpectralFrame]) -> BaselineModel:
    if len(frames) < 2:
        raise InsufficientDataError(
            f"baseline needs >= 2 frames, got {len(frames)}")
    X = np.stack([extract_features(f).scalars() for f in frames])
    return BaselineModel(sensor_id=sensor_id,
                         feature_mean=tuple(X.mean(axis=0)),
                         feature_std=tuple(X.std(axis=0)),
                         n_frames=len(frames))


def anomaly_score(frame: dsp.SpectralFrame, baseline: BaselineModel) -> float:
    x = extract_features(frame).scalars()
    mean = np.asarray(baseline.feature_mean)
    std = np.maximum(np.asarray(baseline.feature_std), STD_EPS)
    return float(np.max(np.abs(x - mean) / std))


# -- direction of travel ----------------------------------------------------


def _envelope(samples: np.ndarray, sample_rate: int) -> np.ndarray:
    window = max(1, int(round(sample_rate / ENVELOPE_WINDOW_FRACTION)))
    kernel = np.ones(window) / window
    smoothed = np.convolve(np.abs(samples.astype(np.float64)), kernel,
                           mode="same")
    return smoothed - smoothed.mean()


def _xcorr_peak_lag(a: np.ndarray, b: np.ndarray) -> int:
    """Lag of the full cross-correlation peak; c[lag] = sum a[n] b[n-lag]."""
    n = len(a) + len(b) - 1
    nfft = 1 << (n - 1).bit_length()
    corr = np.fft.irfft(np.fft.rfft(a, nfft) * np.fft.rfft(b[::-1], nfft),
                        nfft)[:n]
    return int(np.argmax(corr)) - (len(b) - 1)


def detect_direction_waveforms(wa, wb, subunit_spacing: float
                               ) -> DirectionEstimate:
    if len(wa.samples) == 0 or len(wb.samples) == 0:
        raise ParameterError("both subunit waveforms must be non-empty")
    if wa.sample_rate != wb.sample_rate:
        raise ParameterError("subunit sample rates differ")
    if subunit_spacing <= 0:
        raise ParameterError("subunit_spacing must be positive")
    fs = wa.sample_rate

    lag = _xcorr_peak_lag(_envelope(wa.samples, fs), _envelope(wb.samples, fs))
    # b delayed by d samples peaks at lag = -d
    delta_samples = -lag
    if abs(delta_samples) < 1:
        raise IndeterminateDirectionError(
            "cross-correlation peak within one sample of zero lag")
    delta_t = delta_samples / fs
    direction = (PassDirection.A_TO_B if delta_t > 0
                 else PassDirection.B_TO_A)
    return DirectionEstimate(direction=direction, delta_t=delta_t,
                             speed_estimate=subunit_spacing / abs(delta_t))


def detect_direction(event: TrackPassEvent) -> DirectionEstimate:
    return detect_direction_waveforms(event.subunit_a_waveform,
                                      event.subunit_b_waveform,
                                      event.subunit_spacing)


# -- pre/post maintenance comparison ----------------------------------------


def compare_pre_post(pre_frames: Sequence[dsp.SpectralFrame],
                     post_frames: Sequence[dsp.SpectralFrame]) -> PrePostReport:
    if not pre_frames or not post_frames:
        raise InsufficientDataError("pre and post sets must be non-empty")

    def mean_bands(frames: Sequence[dsp.SpectralFrame]) -> np.ndarray:
        X = np.stack([extract_features(f).scalars()[:N_BANDS] for f in frames])
        return np.maximum(X.mean(axis=0), ENERGY_FLOOR)

    ratio = mean_bands(post_frames) / mean_bands(pre_frames)
    return PrePostReport(band_ratio=tuple(float(r) for r in ratio),
                         delta_score=float(np.max(np.abs(np.log2(ratio)))))


# -- classifier --------------------------------------------------------------


def train_classifier(labeled: Sequence[tuple[FeatureVector, str]]
                     ) -> ClassifierModel:
    if not labeled:
        raise InsufficientDataError("empty training set")
    by_class: dict[str, list[FeatureVector]] = {}
    for fv, kind in labeled:
        by_class.setdefault(str(kind), []).append(fv)
    classes = sorted(by_class)
    thin = [c for c in classes if len(by_class[c]) < 2]
    if len(classes) < 2 or thin:
        raise InsufficientDataError(
            "need >= 2 classes with >= 2 samples each; "
            f"classes={classes}, underpopulated={thin}")

    X = np.stack([fv.scalars() for fv, _ in labeled])
    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), STD_EPS)
    centroids = []
    for c in classes:
        Z = (np.stack([fv.scalars() for fv in by_class[c]]) - mean) / std
        centroids.append(tuple(float(v) for v in Z.mean(axis=0)))
    return ClassifierModel(classes=tuple(classes), centroids=tuple(centroids),
                           feature_mean=tuple(float(v) for v in mean),
                           feature_std=tuple(float(v) for v in std))


def predict(model: ClassifierModel,
            features: FeatureVector) -> PredictionCandidate:
    z = (features.scalars() - np.asarray(model.feature_mean)) \
        / np.asarray(model.feature_std)
    dists = np.linalg.norm(np.asarray(model.centroids) - z, axis=1)
    best = int(np.argmin(dists))
    # softmax over negative distances, shifted for stability
    weights = np.exp(-(dists - dists[best]))
    return PredictionCandidate(predicted=model.classes[best],
                               confidence=float(weights[best] / weights.sum()),
                               distances=tuple(float(d) for d in dists))


# -- model files --------------------------------------------------------------


def model_fingerprint(model) -> str:
    canonical = json.dumps(model.to_json(), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def dump_model(model) -> str:
    obj = model.to_json()
    obj["fingerprint"] = model_fingerprint(model)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def load_model(text: str):
    obj = json.loads(text)
    stated = obj.pop("fingerprint", None)
    kinds = {"classifier": ClassifierModel, "baseline": BaselineModel}
    try:
        model = kinds[obj.get("kind")].from_json(obj)
    except (KeyError, TypeError, ValueError):
        raise ValidationError("kind", "not a recognizable model file") from None
    if stated is not None and stated != model_fingerprint(model):
        raise ValidationError("fingerprint",
                              "model file does not match its fingerprint")
    return model


# -- recommendations -----------------------------------------------------------


def publish_recommendation(candidate: PredictionCandidate,
                           evidence: Sequence[FrameRef], store: Ledger, *,
                           subject: str, model: ClassifierModel,
                           author: str) -> Recommendation:
    if not evidence:
        raise ParameterError("evidence must be non-empty")
    for key, version in evidence:
        if store.get_version(key, version) is None:
            raise UnknownReferenceError(f"evidence {key!r} v{version} "
                                        "is not in the ledger")
    rec = Recommendation(rec_id=str(uuid.uuid4()), subject=subject,
                         predicted_issue=candidate.predicted,
                         confidence=candidate.confidence,
                         evidence=tuple(evidence),
                         created_at=time.time_ns() // 1000,
                         model_fingerprint=model_fingerprint(model))
    payload = json.dumps(rec.to_json(), sort_keys=True,
                         separators=(",", ":")).encode()
    store.append(REC_KEY_PREFIX + subject, payload, author)
    return rec
