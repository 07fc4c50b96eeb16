from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class LabeledVector:
    """One vectorized image with its class id and view tag"""

    vector: np.ndarray
    class_id: int
    view: str = ""


def as_training_pairs(items: Sequence[LabeledVector]) -> List[Tuple[np.ndarray, int]]:
    """(vector, class id) pairs in the form build_dictionary expects"""
    return [(item.vector, item.class_id) for item in items]


def first_per_class(items: Sequence[LabeledVector], count: int) -> List[LabeledVector]:
    """Keep the first ``count`` vectors of every class, preserving order"""
    seen: Dict[int, int] = {}
    kept = []
    for item in items:
        if seen.get(item.class_id, 0) < count:
            kept.append(item)
            seen[item.class_id] = seen.get(item.class_id, 0) + 1
    return kept


def restrict_classes(items: Sequence[LabeledVector], num_classes: int) -> List[LabeledVector]:
    """Keep class ids 1..num_classes (reduced-class experiments)"""
    return [item for item in items if item.class_id <= num_classes]
