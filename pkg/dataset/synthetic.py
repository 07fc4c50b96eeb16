"""
Synthetic multi-view subjects.

Every class (subject) owns a ``subspace_dim``-dimensional basis B_r of R^m
and an identity vector c_r. A view v applies a view-specific linear map R_v
in subspace coordinates, so a sample is

    B_r R_v (c_r + within_class_std * xi) + noise_std * eps

Inter-class coherence mixes a shared component into every basis:
B_r = orth(sqrt(1 - coherence) U_r + sqrt(coherence) U_shared). Training
vectors only use ``train_views``; the test pool covers every view.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from dataset.records import LabeledVector
from shared.constants import (
    DEFAULT_COHERENCE,
    DEFAULT_FEATURE_DIM,
    DEFAULT_NOISE_STD,
    DEFAULT_NUM_CLASSES,
    DEFAULT_SEED,
    DEFAULT_SUBSPACE_DIM,
    DEFAULT_TEST_PER_VIEW,
    DEFAULT_TPC,
    DEFAULT_VIEW_DISTORTION,
    DEFAULT_VIEWS_PER_SUBJECT,
    DEFAULT_WITHIN_CLASS_STD,
)
from shared.exceptions import ConfigError
from shared.utils import make_rng
from shared.validation import Validator, require

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = DEFAULT_NUM_CLASSES
    atoms_per_class: int = DEFAULT_TPC
    feature_dim: int = DEFAULT_FEATURE_DIM
    views_per_subject: int = DEFAULT_VIEWS_PER_SUBJECT
    subspace_dim: int = DEFAULT_SUBSPACE_DIM
    noise_std: float = DEFAULT_NOISE_STD
    coherence: float = DEFAULT_COHERENCE
    seed: int = DEFAULT_SEED
    within_class_std: float = DEFAULT_WITHIN_CLASS_STD
    view_distortion: float = DEFAULT_VIEW_DISTORTION
    test_per_view: int = DEFAULT_TEST_PER_VIEW
    train_views: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        require("classes", self.num_classes, Validator.at_least(1))
        require("tpc", self.atoms_per_class, Validator.at_least(1))
        require("dim", self.feature_dim, Validator.at_least(1))
        require("views_per_subject", self.views_per_subject, Validator.at_least(1))
        require("subspace_dim", self.subspace_dim, Validator.at_least(1))
        require("noise_std", self.noise_std, Validator.non_negative)
        require("coherence", self.coherence, Validator.half_open_unit_interval)
        require("seed", self.seed, Validator.at_least(0))
        require("within_class_std", self.within_class_std, Validator.non_negative)
        require("view_distortion", self.view_distortion, Validator.non_negative)
        require("test_per_view", self.test_per_view, Validator.at_least(1))
        if self.subspace_dim > self.feature_dim:
            raise ConfigError(
                f"subspace_dim ({self.subspace_dim}) cannot exceed feature dimension ({self.feature_dim})")
        if self.train_views is not None:
            if not self.train_views:
                raise ConfigError("train_views must not be empty")
            bad = [v for v in self.train_views if not 0 <= v < self.views_per_subject]
            if bad:
                raise ConfigError(f"train views {bad} outside 0..{self.views_per_subject - 1}")

    @property
    def training_views(self) -> Tuple[int, ...]:
        """Explicit train views, or every other view (a strict subset when V > 1)"""
        if self.train_views is not None:
            return tuple(sorted(set(self.train_views)))
        return tuple(range(0, self.views_per_subject, 2))


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    train: Tuple[LabeledVector, ...]
    test_pool: Tuple[LabeledVector, ...]
    bases: Dict[int, np.ndarray]
    class_names: Tuple[str, ...]
    train_views: Tuple[int, ...]


def _orthonormal(matrix: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(matrix)
    return q


def _class_bases(spec: SyntheticSpec, rng: np.random.Generator) -> Dict[int, np.ndarray]:
    m, d, C = spec.feature_dim, spec.subspace_dim, spec.num_classes
    if (C + 1) * d <= m:
        pool = _orthonormal(rng.standard_normal((m, (C + 1) * d)))
        raw = {r: pool[:, (r - 1) * d:r * d] for r in range(1, C + 1)}
        shared = pool[:, C * d:]
    else:
        logger.warning(f"{C} classes x {d} dims do not fit orthogonally in R^{m}; "
                       "using independent random subspaces")
        raw = {r: _orthonormal(rng.standard_normal((m, d))) for r in range(1, C + 1)}
        shared = _orthonormal(rng.standard_normal((m, d)))

    if spec.coherence == 0.0:
        return raw
    own = math.sqrt(1.0 - spec.coherence)
    common = math.sqrt(spec.coherence)
    return {r: _orthonormal(own * raw[r] + common * shared) for r in raw}


def generate_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    """Deterministic train set and multi-view test pool for ``spec``"""
    rng = make_rng(spec.seed)
    d = spec.subspace_dim

    bases = _class_bases(spec, rng)
    view_maps = [np.eye(d) + spec.view_distortion * rng.standard_normal((d, d)) / math.sqrt(d)
                 for _ in range(spec.views_per_subject)]
    identities = {r: rng.standard_normal(d) for r in bases}

    def draw(class_id: int, view: int) -> np.ndarray:
        coords = identities[class_id] + spec.within_class_std * rng.standard_normal(d)
        vector = bases[class_id] @ (view_maps[view] @ coords)
        if spec.noise_std > 0:
            vector = vector + spec.noise_std * rng.standard_normal(spec.feature_dim)
        vector.flags.writeable = False
        return vector

    train_views = spec.training_views
    train = []
    for class_id in sorted(bases):
        for k in range(spec.atoms_per_class):
            view = train_views[k % len(train_views)]
            train.append(LabeledVector(draw(class_id, view), class_id, str(view)))

    test_pool = []
    for class_id in sorted(bases):
        for view in range(spec.views_per_subject):
            for _ in range(spec.test_per_view):
                test_pool.append(LabeledVector(draw(class_id, view), class_id, str(view)))

    width = len(str(spec.num_classes))
    class_names = tuple(f"subject{r:0{width}d}" for r in sorted(bases))
    logger.info(f"Generated {len(train)} training and {len(test_pool)} test vectors "
                f"(C={spec.num_classes}, m={spec.feature_dim}, V={spec.views_per_subject})")
    return SyntheticDataset(train=tuple(train), test_pool=tuple(test_pool), bases=bases,
                            class_names=class_names, train_views=train_views)
