"""
Affordance score: how close a primitive's reach point is to the places where
that primitive makes sense in the current state.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List

import numpy as np

from .pamdp import ContractViolation, ParameterizedAction, PrimitiveType

DEFAULT_THRESHOLDS = {
    PrimitiveType.REACH: 0.06,
    PrimitiveType.GRASP: 0.03,
    PrimitiveType.PUSH: 0.12,
}

# Primitives that are always afforded
UNCONDITIONAL = (PrimitiveType.ATOMIC, PrimitiveType.RELEASE)


@dataclass(frozen=True)
class AffordanceSpec:
    thresholds: Dict[PrimitiveType, float] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    scale: float = 3.0

    def __post_init__(self):
        for ptype, tau in self.thresholds.items():
            if not tau > 0:
                raise ContractViolation(f"Affordance threshold for {PrimitiveType(ptype).label} must be > 0")
        if self.scale < 0:
            raise ContractViolation("Affordance score scale must be >= 0")

    @classmethod
    def from_config(cls, config) -> 'AffordanceSpec':
        return cls(
            thresholds={
                PrimitiveType.REACH: config.affordance_threshold_reach,
                PrimitiveType.GRASP: config.affordance_threshold_grasp,
                PrimitiveType.PUSH: config.affordance_threshold_push,
            },
            scale=config.affordance_score_scale,
        )

    def threshold(self, ptype: PrimitiveType) -> float:
        return self.thresholds[ptype]


def keypoints(task, state, ptype: PrimitiveType) -> List[np.ndarray]:
    """Task keypoints for a primitive in the current state"""
    return [np.asarray(p, dtype=np.float64) for p in task.keypoints(state, ptype)]


def score_against(reach_point: np.ndarray, points: Iterable[np.ndarray], tau: float) -> float:
    """max over p of 1 - tanh(max(|x - p| - tau, 0)); 0 for no keypoints"""
    points = list(points)
    if not points:
        return 0.0
    distances = np.linalg.norm(np.asarray(points) - np.asarray(reach_point)[:3], axis=1)
    return float(np.max(1.0 - np.tanh(np.maximum(distances - tau, 0.0))))


def affordance_score(task, state, action: ParameterizedAction, spec: AffordanceSpec) -> float:
    if action.ptype in UNCONDITIONAL:
        return 1.0
    return score_against(action.reach_point, keypoints(task, state, action.ptype), spec.threshold(action.ptype))
