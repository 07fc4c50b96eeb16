"""
Domain types for multi-task spike-and-slab classification.

The hierarchy per class is

    y_t | A, x_t        ~ N(A x_t, sigma_n2 I)
    x_ti | gamma_ti     ~ gamma_ti N(0, sigma2 / lam) + (1 - gamma_ti) delta_0
    gamma_ti | kappa_ti ~ Bernoulli(kappa_ti)

``gamma_ti = 1`` if and only if ``x_ti != 0``. Every array held by these
types is a private read-only copy, so instances can be shared between
workers.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from shared.constants import DEFAULT_LAMBDA, DEFAULT_SIGMA2, DEFAULT_SIGMA_N2
from shared.exceptions import ConfigError, DatasetError, DimensionError
from shared.validation import Validator, require

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-9


def _frozen(array: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Column-normalized m x n matrix whose columns are grouped by class"""

    atoms: np.ndarray
    class_of: np.ndarray
    class_ranges: Dict[int, Tuple[int, int]]
    class_names: Tuple[str, ...] = ()

    def __post_init__(self):
        m, n = self.atoms.shape
        if m < 1 or n < 1:
            raise DimensionError(f"dictionary must be non-empty, got shape {self.atoms.shape}")
        if self.class_of.shape != (n,):
            raise DimensionError(f"class_of has length {self.class_of.shape[0]}, expected {n}")
        if len(self.class_ranges) < 2:
            raise ConfigError(f"dictionary needs at least 2 classes, got {len(self.class_ranges)}")
        expected_start = 0
        for class_id in sorted(self.class_ranges):
            start, end = self.class_ranges[class_id]
            if start != expected_start or end <= start:
                raise ConfigError(f"class ranges do not partition the columns at class {class_id}")
            expected_start = end
        if expected_start != n:
            raise ConfigError("class ranges do not cover every column")
        norms = np.linalg.norm(self.atoms, axis=0)
        if np.any(np.abs(norms - 1.0) >= NORM_TOLERANCE):
            raise ConfigError("dictionary columns must have unit Euclidean norm")

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.class_ranges)

    @property
    def class_ids(self) -> List[int]:
        return sorted(self.class_ranges)

    def class_slice(self, class_id: int) -> slice:
        """Column slice of A_{C_r}"""
        if class_id not in self.class_ranges:
            raise ConfigError(f"unknown class id {class_id}")
        start, end = self.class_ranges[class_id]
        return slice(start, end)

    def class_name(self, class_id: int) -> str:
        if self.class_names:
            return self.class_names[class_id - 1]
        return str(class_id)

    def restrict(self, class_ids: Iterable[int]) -> "Dictionary":
        """Sub-dictionary over the given classes, renumbered 1..C'"""
        keep = sorted(set(class_ids))
        images = []
        names = []
        for new_id, class_id in enumerate(keep, start=1):
            for column in self.atoms[:, self.class_slice(class_id)].T:
                images.append((column, new_id))
            names.append(self.class_name(class_id))
        return build_dictionary(images, class_names=names)


@dataclass(frozen=True)
class PriorParams:
    """Hyperparameters sigma2, sigma_n2 and the slab precision multiplier lam"""

    sigma2: float = DEFAULT_SIGMA2
    sigma_n2: float = DEFAULT_SIGMA_N2
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        require("sigma2", self.sigma2, Validator.positive)
        require("sigma_n2", self.sigma_n2, Validator.positive)
        require("lambda", self.lam, Validator.positive)

    @property
    def slab_variance(self) -> float:
        """tau^2 = sigma2 / lam"""
        return self.sigma2 / self.lam

    @property
    def data_weight(self) -> float:
        """Weight sigma2 / sigma_n2 of the reconstruction term"""
        return self.sigma2 / self.sigma_n2


@dataclass(frozen=True, eq=False)
class InclusionMatrix:
    """T x n matrix K of prior inclusion probabilities"""

    kappa: np.ndarray

    def __post_init__(self):
        if self.kappa.ndim != 2 or self.kappa.shape[0] < 1 or self.kappa.shape[1] < 1:
            raise DimensionError(f"inclusion matrix must be T x n, got shape {self.kappa.shape}")
        if not np.all((self.kappa > 0.0) & (self.kappa < 1.0)):
            raise ConfigError("every inclusion probability must lie strictly between 0 and 1")

    @classmethod
    def from_array(cls, kappa) -> "InclusionMatrix":
        return cls(_frozen(np.atleast_2d(kappa)))

    @property
    def num_tasks(self) -> int:
        return self.kappa.shape[0]

    @property
    def n(self) -> int:
        return self.kappa.shape[1]

    def row(self, task: int) -> np.ndarray:
        return self.kappa[task]


@dataclass(frozen=True, eq=False)
class ObservationMatrix:
    """m x T matrix Y, one test vector per task/view"""

    columns: np.ndarray

    def __post_init__(self):
        if self.columns.ndim != 2 or self.columns.shape[1] < 1:
            raise DimensionError(f"observation matrix must be m x T with T >= 1, got {self.columns.shape}")

    @classmethod
    def from_vectors(cls, vectors: Sequence[np.ndarray]) -> "ObservationMatrix":
        if len(vectors) == 0:
            raise DimensionError("observation matrix needs at least one task")
        return cls(_frozen(np.column_stack([np.asarray(v, dtype=np.float64) for v in vectors])))

    @classmethod
    def from_array(cls, array) -> "ObservationMatrix":
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 1:
            array = array[:, None]
        return cls(_frozen(array))

    @property
    def m(self) -> int:
        return self.columns.shape[0]

    @property
    def num_tasks(self) -> int:
        return self.columns.shape[1]

    def task(self, t: int) -> np.ndarray:
        return self.columns[:, t]

    def normalized(self) -> "ObservationMatrix":
        """Copy with every column scaled to unit norm (zero columns kept)"""
        norms = np.linalg.norm(self.columns, axis=0)
        norms[norms == 0.0] = 1.0
        return ObservationMatrix(_frozen(self.columns / norms))

    def check_against(self, dictionary: Dictionary) -> None:
        if self.m != dictionary.m:
            raise DimensionError(
                f"observation dimension {self.m} does not match dictionary dimension {dictionary.m}")


@dataclass(frozen=True, eq=False)
class CodeMatrix:
    """n x T coefficient matrix X"""

    values: np.ndarray

    @classmethod
    def from_columns(cls, columns: Sequence[np.ndarray]) -> "CodeMatrix":
        return cls(_frozen(np.column_stack(columns)))


@dataclass(frozen=True, eq=False)
class SupportMatrix:
    """n x T binary matrix Gamma; 0 marks the spike at zero"""

    flags: np.ndarray

    def __post_init__(self):
        if not np.all((self.flags == 0) | (self.flags == 1)):
            raise ConfigError("support entries must be 0 or 1")

    @classmethod
    def from_columns(cls, columns: Sequence[np.ndarray]) -> "SupportMatrix":
        return cls(_frozen(np.column_stack(columns), dtype=np.uint8))


def spike_consistent(code: np.ndarray, support: np.ndarray) -> bool:
    """gamma == 0 implies a bit-identical zero coefficient"""
    code = np.asarray(code)
    support = np.asarray(support)
    if code.shape != support.shape:
        return False
    return bool(np.all(code[support == 0] == 0.0))


def build_dictionary(images: Sequence[Tuple[Sequence[float], int]],
                     class_names: Optional[Sequence[str]] = None) -> Dictionary:
    """
    Stack labeled feature vectors into a class-grouped, unit-norm dictionary.

    Columns are ordered by ascending class id; input order is preserved
    within a class. Class ids must be exactly 1..C with C >= 2.
    """
    if len(images) == 0:
        raise DatasetError("no training images given")

    first = np.asarray(images[0][0], dtype=np.float64).ravel()
    m = first.shape[0]
    if m == 0:
        raise DimensionError("feature vectors must be non-empty", index=0)

    vectors = []
    labels = []
    for index, (vector, class_id) in enumerate(images):
        vector = np.asarray(vector, dtype=np.float64).ravel()
        if vector.shape[0] != m:
            raise DimensionError(
                f"image {index} has length {vector.shape[0]}, expected {m}", index=index)
        norm = np.linalg.norm(vector)
        if norm == 0.0 or not np.isfinite(norm):
            raise DatasetError(f"image {index} has zero (or non-finite) norm")
        vectors.append(vector / norm)
        labels.append(int(class_id))

    class_ids = sorted(set(labels))
    if class_ids != list(range(1, len(class_ids) + 1)):
        raise ConfigError(f"class ids must be 1..C without gaps, got {class_ids}")
    if len(class_ids) < 2:
        raise ConfigError("at least 2 classes are required")
    if class_names is not None and len(class_names) != len(class_ids):
        raise ConfigError(f"{len(class_names)} class names given for {len(class_ids)} classes")

    order = sorted(range(len(labels)), key=lambda i: labels[i])
    atoms = np.column_stack([vectors[i] for i in order])
    class_of = np.array([labels[i] for i in order], dtype=np.int64)

    class_ranges = {}
    start = 0
    for class_id in class_ids:
        count = int(np.sum(class_of == class_id))
        class_ranges[class_id] = (start, start + count)
        start += count

    dictionary = Dictionary(
        atoms=_frozen(atoms),
        class_of=_frozen(class_of, dtype=np.int64),
        class_ranges=class_ranges,
        class_names=tuple(class_names) if class_names is not None else (),
    )
    logger.debug(f"Built dictionary m={dictionary.m} n={dictionary.n} C={dictionary.num_classes}")
    return dictionary


def build_inclusion_matrix(dictionary: Dictionary, target_class: int, num_tasks: int,
                           kappa_in: float, kappa_out: float) -> InclusionMatrix:
    """Two-level class-indicator prior: kappa_in on A_{C_r}, kappa_out elsewhere, every task alike"""
    require("kappa_in", kappa_in, Validator.open_unit_interval)
    require("kappa_out", kappa_out, Validator.open_unit_interval)
    if kappa_out > kappa_in:
        raise ConfigError(f"kappa_out ({kappa_out}) must not exceed kappa_in ({kappa_in})")
    require("T", num_tasks, Validator.at_least(1))

    row = np.full(dictionary.n, float(kappa_out))
    row[dictionary.class_slice(target_class)] = float(kappa_in)
    return InclusionMatrix(_frozen(np.tile(row, (num_tasks, 1))))


def rho(params: PriorParams, kappa: float) -> float:
    """Per-coefficient inclusion penalty sigma2 * log(2 pi sigma2 (1-kappa)^2 / (lam kappa^2))"""
    require("kappa", kappa, Validator.open_unit_interval)
    return params.sigma2 * math.log(
        2.0 * math.pi * params.sigma2 * (1.0 - kappa) ** 2 / (params.lam * kappa ** 2))


def rho_matrix(params: PriorParams, inclusion: InclusionMatrix) -> np.ndarray:
    """Vectorized rho over a whole inclusion matrix (T x n)"""
    kappa = inclusion.kappa
    values = params.sigma2 * (
        np.log(2.0 * math.pi * params.sigma2 / params.lam)
        + 2.0 * np.log1p(-kappa) - 2.0 * np.log(kappa))
    values.flags.writeable = False
    return values
