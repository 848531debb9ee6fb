"""Distance-to-healthy classification of multifractal feature vectors.

A model is calibrated from feature vectors of healthy machines (and
optionally faulty ones). A candidate is labelled faulty when its distance
from the healthy centre is strictly greater than the threshold; a tie is
labelled healthy.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    InsufficientReferenceError,
    MvFractalError,
    NoSeparationError,
    NotPositiveDefiniteError,
)
from .features import FEATURE_NAMES, FeatureVector, MultifractalFeatures
from .norms import SpdMatrix, spd_factorize

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.05
# standard deviations below this fraction of |mean| (or absolute floor) count as zero spread
_SCALE_FLOOR = 1e-12


class DistanceKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    MAHALANOBIS = "mahalanobis"


class MarginPolicy(str, enum.Enum):
    MAX_HEALTHY = "max_healthy"
    MIDPOINT = "midpoint"


class FeatureMode(str, enum.Enum):
    SCALARS = "scalars"
    CURVES = "curves"


class Label(str, enum.Enum):
    HEALTHY = "healthy"
    FAULTY = "faulty"


@dataclass(frozen=True)
class HealthDecision:
    distance: float
    threshold: float
    label: Label

    @property
    def margin(self) -> float:
        return self.distance - self.threshold

    def to_dict(self) -> dict:
        return {"distance": self.distance, "threshold": self.threshold, "label": self.label.value, "margin": self.margin}


@dataclass(frozen=True)
class DiagnosisModel:
    reference: np.ndarray  # (n_ref, d) healthy feature rows
    center: np.ndarray
    scale: np.ndarray
    distance_kind: DistanceKind
    threshold: float
    margin_policy: MarginPolicy
    feature_mode: FeatureMode = FeatureMode.SCALARS
    reference_cov: SpdMatrix | None = None
    epsilon: float = DEFAULT_EPSILON
    q_values: tuple | None = None

    @property
    def n_features(self) -> int:
        return self.center.size

    def to_dict(self) -> dict:
        return {
            "reference": self.reference.tolist(),
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "distance_kind": self.distance_kind.value,
            "threshold": self.threshold,
            "margin_policy": self.margin_policy.value,
            "feature_mode": self.feature_mode.value,
            "reference_cov": None if self.reference_cov is None else self.reference_cov.sigma.tolist(),
            "epsilon": self.epsilon,
            "q_values": None if self.q_values is None else list(self.q_values),
            "feature_names": list(FEATURE_NAMES) if self.feature_mode == FeatureMode.SCALARS else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosisModel":
        cov = d.get("reference_cov")
        return cls(
            reference=np.asarray(d["reference"], dtype=np.float64),
            center=np.asarray(d["center"], dtype=np.float64),
            scale=np.asarray(d["scale"], dtype=np.float64),
            distance_kind=DistanceKind(d["distance_kind"]),
            threshold=float(d["threshold"]),
            margin_policy=MarginPolicy(d["margin_policy"]),
            feature_mode=FeatureMode(d.get("feature_mode", "scalars")),
            reference_cov=None if cov is None else spd_factorize(np.asarray(cov)),
            epsilon=float(d.get("epsilon", DEFAULT_EPSILON)),
            q_values=None if d.get("q_values") is None else tuple(d["q_values"]),
        )


def feature_array(item, mode: FeatureMode = FeatureMode.SCALARS) -> np.ndarray:
    """Flatten a feature object into the vector the distance works on.

    Scalar mode takes the descriptor vector; curve mode concatenates
    ``tau_q``, ``h_q`` and ``f(alpha_q)`` over the shared q grid.
    """
    if mode == FeatureMode.CURVES:
        if not isinstance(item, MultifractalFeatures) or not item.complete:
            raise MvFractalError("curve mode needs complete MultifractalFeatures")
        return np.concatenate([item.tau_q, item.h_q, item.f_alpha])
    if isinstance(item, FeatureVector):
        return item.as_array()
    if isinstance(item, MultifractalFeatures):
        from .features import summarize_features

        return summarize_features(item).as_array()
    return np.asarray(item, dtype=np.float64).ravel()


def _distance(phi: np.ndarray, center, scale, kind, cov) -> float:
    z = (phi - center) / scale
    if kind == DistanceKind.MAHALANOBIS:
        return float(cov.mahalanobis(z))
    return float(np.sqrt(z @ z))


def feature_distance(candidate, model: DiagnosisModel) -> float:
    phi = feature_array(candidate, model.feature_mode)
    if phi.size != model.n_features:
        raise DimensionMismatchError(f"candidate has {phi.size} features, model expects {model.n_features}")
    return _distance(phi, model.center, model.scale, model.distance_kind, model.reference_cov)


def threshold_from_distances(healthy, faulty=None, policy=MarginPolicy.MAX_HEALTHY, epsilon=DEFAULT_EPSILON) -> float:
    """Decision threshold from calibration distances.

    ``MAX_HEALTHY`` inflates the largest healthy distance by ``1 + epsilon``;
    ``MIDPOINT`` sits halfway between the largest healthy and the smallest
    faulty distance and fails when the two sets overlap.
    """
    d_h = float(np.max(healthy))
    if MarginPolicy(policy) == MarginPolicy.MAX_HEALTHY:
        return (1.0 + epsilon) * d_h
    if faulty is None or len(faulty) == 0:
        raise MvFractalError("the midpoint policy needs faulty calibration vectors")
    d_f = float(np.min(faulty))
    if d_f <= d_h:
        raise NoSeparationError(f"nearest faulty distance {d_f:.4g} does not exceed farthest healthy {d_h:.4g}")
    return 0.5 * (d_h + d_f)


def calibrate_threshold(
    healthy: Sequence,
    faulty: Sequence | None = None,
    policy: MarginPolicy = MarginPolicy.MAX_HEALTHY,
    distance_kind: DistanceKind | None = None,
    feature_mode: FeatureMode = FeatureMode.SCALARS,
    epsilon: float = DEFAULT_EPSILON,
) -> DiagnosisModel:
    """Build a model from healthy (and optionally faulty) feature objects.

    Features are standardized by the healthy mean and standard deviation.
    When ``distance_kind`` is not given, the Mahalanobis distance is used
    if there are at least three healthy references per feature, otherwise
    the standardized Euclidean distance.
    """
    policy = MarginPolicy(policy)
    feature_mode = FeatureMode(feature_mode)
    if len(healthy) < 2:
        raise InsufficientReferenceError(f"need at least 2 healthy references, got {len(healthy)}")
    ref = np.vstack([feature_array(h, feature_mode) for h in healthy])
    n_ref, d = ref.shape
    center = ref.mean(axis=0)
    if feature_mode == FeatureMode.CURVES:
        scale = np.ones(d)
    else:
        sd = ref.std(axis=0, ddof=1)
        floor = _SCALE_FLOOR * np.maximum(np.abs(center), 1.0)
        scale = np.where(sd > floor, sd, 1.0)
    if distance_kind is None:
        distance_kind = DistanceKind.MAHALANOBIS if n_ref >= 3 * d else DistanceKind.EUCLIDEAN
    distance_kind = DistanceKind(distance_kind)
    cov = None
    if distance_kind == DistanceKind.MAHALANOBIS:
        z = (ref - center) / scale
        try:
            cov = spd_factorize(z.T @ z / (n_ref - 1), shrinkage=1e-6)
        except NotPositiveDefiniteError:
            log.warning("healthy feature covariance is singular; falling back to the Euclidean distance")
            distance_kind = DistanceKind.EUCLIDEAN
    d_h = [_distance(r, center, scale, distance_kind, cov) for r in ref]
    d_f = None
    if faulty:
        d_f = [_distance(feature_array(f, feature_mode), center, scale, distance_kind, cov) for f in faulty]
    threshold = threshold_from_distances(d_h, d_f, policy, epsilon)
    q_values = None
    if feature_mode == FeatureMode.CURVES:
        q_values = healthy[0].q_grid.q_values
    return DiagnosisModel(ref, center, scale, distance_kind, threshold, policy, feature_mode, cov, epsilon, q_values)


def classify(candidate, model: DiagnosisModel) -> HealthDecision:
    d = feature_distance(candidate, model)
    if d == model.threshold:
        log.info("distance equals the threshold (%.6g); labelled healthy", d)
    label = Label.FAULTY if d > model.threshold else Label.HEALTHY
    return HealthDecision(d, model.threshold, label)
