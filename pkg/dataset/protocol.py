"""
Test-matrix sampling: pick a subject uniformly, then T distinct views of it
uniformly without replacement, and stack one vector per view as columns.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from dataset.records import LabeledVector
from michs.model import ObservationMatrix
from shared.constants import DEFAULT_NUM_TRIALS, DEFAULT_SEED, DEFAULT_VIEWS_T
from shared.exceptions import ConfigError, DatasetError
from shared.utils import PROTOCOL_STREAM, derive_seed, make_rng
from shared.validation import Validator, require

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentSpec:
    views: int = DEFAULT_VIEWS_T
    num_trials: int = DEFAULT_NUM_TRIALS
    seed: int = DEFAULT_SEED
    test_views: Optional[Tuple[str, ...]] = None
    class_subset: Optional[int] = None

    def __post_init__(self):
        require("views", self.views, Validator.at_least(1))
        require("num_trials", self.num_trials, Validator.at_least(1))
        require("seed", self.seed, Validator.at_least(0))
        if self.class_subset is not None:
            require("classes", self.class_subset, Validator.at_least(2))
        if self.test_views is not None and len(self.test_views) < self.views:
            raise ConfigError(f"{len(self.test_views)} test views cannot supply T={self.views} views")


def group_by_subject(pool: Sequence[LabeledVector],
                     test_views: Optional[Sequence[str]] = None) -> Dict[int, Dict[str, List[np.ndarray]]]:
    """subject -> view tag -> vectors, in pool order"""
    allowed = set(test_views) if test_views is not None else None
    grouped: Dict[int, Dict[str, List[np.ndarray]]] = {}
    for item in pool:
        if allowed is not None and item.view not in allowed:
            continue
        grouped.setdefault(item.class_id, {}).setdefault(item.view, []).append(item.vector)
    return grouped


def sample_test_matrices(pool: Sequence[LabeledVector], spec: ExperimentSpec,
                         class_names: Sequence[str] = ()) -> List[Tuple[ObservationMatrix, int]]:
    """``spec.num_trials`` (Y, true class) draws, deterministic in ``spec.seed``"""
    grouped = group_by_subject(pool, spec.test_views)
    if spec.class_subset is not None:
        grouped = {c: views for c, views in grouped.items() if c <= spec.class_subset}
    if not grouped:
        raise DatasetError("test pool has no vectors in the requested views")

    subjects = sorted(grouped)
    for subject in subjects:
        available = len(grouped[subject])
        if available < spec.views:
            name = class_names[subject - 1] if class_names else str(subject)
            raise DatasetError(f"subject {name} has {available} distinct views, T={spec.views} required")

    rng = make_rng(derive_seed(spec.seed, PROTOCOL_STREAM))
    samples = []
    for _ in range(spec.num_trials):
        subject = subjects[int(rng.integers(len(subjects)))]
        view_tags = sorted(grouped[subject])
        chosen = rng.choice(len(view_tags), size=spec.views, replace=False)
        columns = []
        for index in chosen:
            candidates = grouped[subject][view_tags[int(index)]]
            columns.append(candidates[int(rng.integers(len(candidates)))])
        samples.append((ObservationMatrix.from_vectors(columns), subject))

    logger.debug(f"Sampled {len(samples)} test matrices with T={spec.views} from {len(subjects)} subjects")
    return samples
