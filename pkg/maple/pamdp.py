"""
Parameterized-action MDP types shared by the simulator, the primitives,
the trainer and the sketch analyzer.

An action is a pair (primitive type, parameters). Policies emit parameters
in the normalized box [-1, 1]^d_A; every primitive owns an affine map from
that box onto its workspace bounds and only reads its first d_a entries.
"""

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional, Sequence, Tuple

import numpy as np

ATOMIC_DIM = 5

# Workspace box in meters: table surface at z = 0
WORKSPACE_LOW = np.array([-0.25, -0.25, 0.0])
WORKSPACE_HIGH = np.array([0.25, 0.25, 0.25])

YAW_BOUNDS = (-np.pi / 2, np.pi / 2)
PUSH_DELTA_BOUNDS = (-0.15, 0.15)


class ContractViolation(ValueError):
    """Raised when an operation is called outside its precondition"""
    pass


class PrimitiveType(IntEnum):
    REACH = 0
    GRASP = 1
    PUSH = 2
    RELEASE = 3
    ATOMIC = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> 'PrimitiveType':
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ContractViolation(f"Unknown primitive type: {text!r}")


@dataclass(frozen=True, eq=False)
class AtomicAction:
    """One 5-DoF low-level command: (dx, dy, dz, dyaw, gripper), each in [-1, 1]"""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (ATOMIC_DIM,):
            raise ContractViolation(f"Atomic action needs {ATOMIC_DIM} values, got shape {values.shape}")
        if not np.all(np.abs(values) <= 1.0):
            raise ContractViolation(f"Atomic action components must lie in [-1, 1]: {values}")
        object.__setattr__(self, 'values', values)

    @classmethod
    def clipped(cls, values) -> 'AtomicAction':
        return cls(np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0))

    @classmethod
    def zero(cls) -> 'AtomicAction':
        return cls(np.zeros(ATOMIC_DIM))

    @property
    def closes_gripper(self) -> bool:
        return bool(self.values[4] < 0)


@dataclass(frozen=True)
class PrimitiveSpec:
    """Metadata for one primitive: parameter width, step budget and bounds"""

    ptype: PrimitiveType
    param_dim: int
    max_atomic_steps: int
    param_bounds: Tuple[Tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.max_atomic_steps < 1:
            raise ContractViolation(f"{self.ptype.label}: max_atomic_steps must be >= 1")
        if len(self.param_bounds) != self.param_dim:
            raise ContractViolation(
                f"{self.ptype.label}: {len(self.param_bounds)} bounds for {self.param_dim} parameters"
            )
        for lo, hi in self.param_bounds:
            if not hi > lo:
                raise ContractViolation(f"{self.ptype.label}: empty parameter interval [{lo}, {hi}]")

    @property
    def lows(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.param_bounds], dtype=np.float64)

    @property
    def highs(self) -> np.ndarray:
        return np.array([hi for _, hi in self.param_bounds], dtype=np.float64)

    def to_workspace(self, normalized: np.ndarray) -> np.ndarray:
        """Map [-1, 1]^d_a onto the parameter bounds"""
        lows, highs = self.lows, self.highs
        return lows + (np.asarray(normalized, dtype=np.float64) + 1.0) * 0.5 * (highs - lows)

    def to_normalized(self, workspace: np.ndarray) -> np.ndarray:
        lows, highs = self.lows, self.highs
        return 2.0 * (np.asarray(workspace, dtype=np.float64) - lows) / (highs - lows) - 1.0


def truncate_params(x: np.ndarray, spec: PrimitiveSpec, full_dim: Optional[int] = None) -> np.ndarray:
    """
    Keep the first d_a components of a full-width parameter vector and map
    them onto the primitive's workspace bounds.

    Args:
        x: Normalized parameters emitted by the policy
        spec: Primitive receiving the parameters
        full_dim: Expected width d_A, when the caller knows the library

    Raises:
        ContractViolation: If x is not a vector of the expected width
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ContractViolation(f"Parameters must be a vector, got shape {x.shape}")
    if full_dim is not None and x.shape[0] != full_dim:
        raise ContractViolation(f"Expected {full_dim} parameters, got {x.shape[0]}")
    if x.shape[0] < spec.param_dim:
        raise ContractViolation(
            f"{spec.ptype.label} needs {spec.param_dim} parameters, got {x.shape[0]}"
        )
    return spec.to_workspace(x[:spec.param_dim])


@dataclass(frozen=True, eq=False)
class ParameterizedAction:
    """The PAMDP action (a, x)"""

    ptype: PrimitiveType
    params_full: np.ndarray
    params_effective: np.ndarray

    @property
    def reach_point(self) -> np.ndarray:
        return self.params_effective[:3]


def default_primitive_specs() -> dict:
    """Parameter widths, step budgets and workspace bounds of the five primitives"""
    position = tuple(zip(WORKSPACE_LOW.tolist(), WORKSPACE_HIGH.tolist()))
    return {
        PrimitiveType.REACH: PrimitiveSpec(PrimitiveType.REACH, 3, 15, position),
        PrimitiveType.GRASP: PrimitiveSpec(PrimitiveType.GRASP, 4, 20, position + (YAW_BOUNDS,)),
        PrimitiveType.PUSH: PrimitiveSpec(
            PrimitiveType.PUSH, 7, 20, position + (YAW_BOUNDS,) + (PUSH_DELTA_BOUNDS,) * 3
        ),
        PrimitiveType.RELEASE: PrimitiveSpec(PrimitiveType.RELEASE, 0, 4, ()),
        PrimitiveType.ATOMIC: PrimitiveSpec(PrimitiveType.ATOMIC, ATOMIC_DIM, 1, ((-1.0, 1.0),) * ATOMIC_DIM),
    }


class PrimitiveLibrary:
    """Ordered set of primitives available to an agent; index i is the policy's i-th choice"""

    def __init__(self, ptypes: Sequence[PrimitiveType], specs: Optional[dict] = None):
        if not ptypes:
            raise ContractViolation("A primitive library needs at least one primitive")
        if len(set(ptypes)) != len(ptypes):
            raise ContractViolation(f"Duplicate primitives in library: {list(ptypes)}")
        specs = specs or default_primitive_specs()
        self.ptypes = tuple(PrimitiveType(p) for p in ptypes)
        self.specs = tuple(specs[p] for p in self.ptypes)
        self._index = {p: i for i, p in enumerate(self.ptypes)}

    @classmethod
    def full(cls) -> 'PrimitiveLibrary':
        return cls(list(PrimitiveType))

    @classmethod
    def without(cls, *excluded: PrimitiveType) -> 'PrimitiveLibrary':
        return cls([p for p in PrimitiveType if p not in excluded])

    @property
    def k(self) -> int:
        return len(self.ptypes)

    @property
    def max_param_dim(self) -> int:
        """d_A, the width of the policy's parameter output"""
        return max(spec.param_dim for spec in self.specs)

    def __contains__(self, ptype) -> bool:
        return ptype in self._index

    def __len__(self) -> int:
        return self.k

    def index(self, ptype: PrimitiveType) -> int:
        try:
            return self._index[ptype]
        except KeyError:
            raise ContractViolation(f"{ptype.label} is not in this library")

    def spec(self, ptype: PrimitiveType) -> PrimitiveSpec:
        return self.specs[self.index(ptype)]

    def make_action(self, ptype: PrimitiveType, params_full: np.ndarray) -> ParameterizedAction:
        params_full = np.asarray(params_full, dtype=np.float64)
        effective = truncate_params(params_full, self.spec(ptype), full_dim=self.max_param_dim)
        return ParameterizedAction(ptype, params_full, effective)

    def labels(self) -> list:
        return [p.label for p in self.ptypes]


@dataclass(frozen=True, eq=False)
class Transition:
    """Replay record (s, a, x, r, s', done)"""

    state: np.ndarray
    action: ParameterizedAction
    reward: float
    next_state: np.ndarray
    terminal: bool
    atomic_steps_consumed: int
    decision_index: int = 0


@dataclass(frozen=True)
class TaskSketch:
    """Ordered primitive types of one episode"""

    tokens: Tuple[PrimitiveType, ...]
    episode_success: bool
    episode_return: float

    def labels(self) -> list:
        return [t.label for t in self.tokens]

    @classmethod
    def from_labels(cls, labels: Sequence[str], success: bool = True, episode_return: float = 0.0) -> 'TaskSketch':
        return cls(tuple(PrimitiveType.parse(label) for label in labels), success, episode_return)
