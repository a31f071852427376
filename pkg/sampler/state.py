# sampler/state.py
from dataclasses import dataclass
from typing import Optional

import numpy as np

# Move kinds, stored as small ints in the per-iteration log
WALK, TRAVERSE, HOP, BLOW, PENALTY = range(5)
KIND_NAMES = ("walk", "traverse", "hop", "blow", "penalty")
BASE_KINDS = (WALK, TRAVERSE, HOP, BLOW)
INIT_LABEL = "init"


@dataclass(frozen=True)
class PairState:
    """
    Extended t-walk state (x, y) with cached log γ at both points.
      • replaced, never mutated, on an accepted move
    """
    x: np.ndarray
    y: np.ndarray
    log_gamma_x: float
    log_gamma_y: float

    @property
    def dim(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class MoveRecord:
    iter: int
    kind: int
    accepted: bool
    log_mh_ratio: float
    rejection_trials: Optional[int] = None
    failed: bool = False                       # sampler failure or unusable gradient

    @property
    def kind_name(self) -> str:
        return KIND_NAMES[self.kind]
