"""
Class assignment for multi-view test matrices.

``classify`` solves one spike-and-slab problem per class hypothesis and
assigns the class with the smallest cost. ``src_l1_classify`` is the
sparse-representation baseline: an l1 code per view, class-restricted
residuals, and a majority vote across views. ``evaluate`` runs either method
over a labeled test set.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from michs.model import Dictionary, ObservationMatrix, PriorParams, build_inclusion_matrix
from michs.sampler import ChainConfig
from michs.solver import ClassSolution, solve_class
from shared.constants import (
    ASSIGN_BY_CHOICES,
    DEFAULT_ASSIGN_BY,
    DEFAULT_KAPPA_IN,
    DEFAULT_KAPPA_OUT,
    DEFAULT_L1_MAX_ITERATIONS,
    DEFAULT_L1_PENALTY,
    DEFAULT_L1_STEP_TOLERANCE,
    METHOD_CHOICES,
)
from shared.exceptions import ConfigError, DatasetError, DimensionError
from shared.utils import derive_seed
from shared.validation import Validator, require

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineConfig:
    """Penalty and stopping rule of the l1 baseline"""

    l1_penalty: float = DEFAULT_L1_PENALTY
    max_iterations: int = DEFAULT_L1_MAX_ITERATIONS
    step_tolerance: float = DEFAULT_L1_STEP_TOLERANCE

    def __post_init__(self):
        require("l1_penalty", self.l1_penalty, Validator.non_negative)
        require("max_iterations", self.max_iterations, Validator.at_least(1))
        require("step_tolerance", self.step_tolerance, Validator.positive)


@dataclass(frozen=True)
class ClassifierSettings:
    """Everything needed to classify one test matrix with either method"""

    method: str = "michs"
    params: PriorParams = field(default_factory=PriorParams)
    kappa_in: float = DEFAULT_KAPPA_IN
    kappa_out: float = DEFAULT_KAPPA_OUT
    chain: ChainConfig = field(default_factory=ChainConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    assign_by: str = DEFAULT_ASSIGN_BY
    normalize: bool = True

    def __post_init__(self):
        require("method", self.method, Validator.choice(METHOD_CHOICES))
        require("assign_by", self.assign_by, Validator.choice(ASSIGN_BY_CHOICES))
        require("kappa_in", self.kappa_in, Validator.open_unit_interval)
        require("kappa_out", self.kappa_out, Validator.open_unit_interval)
        if self.kappa_out > self.kappa_in:
            raise ConfigError(f"kappa_out ({self.kappa_out}) must not exceed kappa_in ({self.kappa_in})")


@dataclass(frozen=True, eq=False)
class ClassificationResult:
    """Predicted class plus the per-class costs it was chosen from"""

    predicted_class: int
    per_class_cost: np.ndarray
    per_class_solutions: Optional[Tuple[ClassSolution, ...]] = None
    votes: Optional[np.ndarray] = None
    converged: bool = True


@dataclass(frozen=True, eq=False)
class L1Solution:
    code: np.ndarray
    iterations: int
    converged: bool
    objective_history: Tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """Accuracy, per-class accuracy and confusion matrix of one evaluation run"""

    accuracy: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray
    mean_wall_time: float
    true_classes: Tuple[int, ...]
    results: Tuple[ClassificationResult, ...]
    wall_times: Tuple[float, ...]

    @property
    def num_samples(self) -> int:
        return len(self.true_classes)


def assign_class(costs) -> int:
    """1-based argmin; the lowest class index wins ties"""
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 1 or costs.size == 0:
        raise ConfigError("cost vector must be a non-empty 1-D array")
    if not np.all(np.isfinite(costs)):
        raise ConfigError("every class cost must be finite")
    return int(np.argmin(costs)) + 1


def majority_vote(labels: Sequence[int], num_classes: int) -> Tuple[int, np.ndarray]:
    """Most frequent 1-based label; the lowest class index wins ties"""
    votes = np.zeros(num_classes, dtype=np.int64)
    for label in labels:
        votes[label - 1] += 1
    return int(np.argmax(votes)) + 1, votes


def classify(dictionary: Dictionary, Y: ObservationMatrix, params: PriorParams,
             kappa_in: float, kappa_out: float, cfg: ChainConfig,
             assign_by: str = DEFAULT_ASSIGN_BY, normalize: bool = True,
             keep_solutions: bool = False,
             class_seeds: Optional[Sequence[int]] = None) -> ClassificationResult:
    """
    Run the per-class solve for every class hypothesis and take the cheapest.

    Class r uses the inclusion matrix that favors A_{C_r} and the chain seed
    ``class_seeds[r - 1]`` when given, otherwise ``derive_seed(cfg.seed, r)``.
    """
    require("assign_by", assign_by, Validator.choice(ASSIGN_BY_CHOICES))
    Y.check_against(dictionary)
    if class_seeds is not None and len(class_seeds) != dictionary.num_classes:
        raise DimensionError(f"{len(class_seeds)} class seeds given for {dictionary.num_classes} classes")
    if normalize:
        Y = Y.normalized()

    costs = np.zeros(dictionary.num_classes)
    solutions = []
    for class_id in dictionary.class_ids:
        K = build_inclusion_matrix(dictionary, class_id, Y.num_tasks, kappa_in, kappa_out)
        seed = class_seeds[class_id - 1] if class_seeds is not None else derive_seed(cfg.seed, class_id)
        solution = solve_class(dictionary, Y, K, params, replace(cfg, seed=seed))
        costs[class_id - 1] = solution.objective if assign_by == "cost" else solution.residual
        solutions.append(solution)
        logger.debug(f"Class {class_id}: objective={solution.objective:.6g} residual={solution.residual:.6g}")

    return ClassificationResult(
        predicted_class=assign_class(costs),
        per_class_cost=costs,
        per_class_solutions=tuple(solutions) if keep_solutions else None,
    )


def _soft_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def ista_l1(atoms: np.ndarray, y: np.ndarray, l1_penalty: float, max_iterations: int,
            step_tolerance: float, record_history: bool = False) -> L1Solution:
    """
    Minimize ||y - A x||^2 + 2 l1_penalty ||x||_1 by iterative soft-thresholding.

    The step is 1/L with L = 2 ||A||_2^2, which makes the objective
    non-increasing. Stops when the largest coordinate change is at most
    ``step_tolerance``; otherwise returns the best iterate with
    ``converged=False``.
    """
    gram = atoms.T @ atoms
    aty = atoms.T @ y
    lipschitz = 2.0 * np.linalg.norm(atoms, 2) ** 2
    step = 1.0 / lipschitz
    threshold = 2.0 * l1_penalty * step

    def objective(code):
        residual = y - atoms @ code
        return float(residual @ residual) + 2.0 * l1_penalty * float(np.sum(np.abs(code)))

    code = np.zeros(atoms.shape[1])
    best_code, best_value = code, objective(code)
    history = [best_value] if record_history else []
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        updated = _soft_threshold(code - step * 2.0 * (gram @ code - aty), threshold)
        change = float(np.max(np.abs(updated - code))) if code.size else 0.0
        code = updated
        value = objective(code)
        if record_history:
            history.append(value)
        if value <= best_value:
            best_code, best_value = code, value
        if change <= step_tolerance:
            converged = True
            break

    if not converged:
        logger.warning(f"ISTA did not converge in {max_iterations} iterations; returning best iterate")
    return L1Solution(code=best_code, iterations=iterations, converged=converged,
                      objective_history=tuple(history))


def class_residuals(dictionary: Dictionary, y: np.ndarray, code: np.ndarray) -> np.ndarray:
    """||y - A delta_r(x)||_2 for every class r, keeping only class-r coefficients"""
    residuals = np.zeros(dictionary.num_classes)
    for class_id in dictionary.class_ids:
        part = dictionary.class_slice(class_id)
        residuals[class_id - 1] = np.linalg.norm(y - dictionary.atoms[:, part] @ code[part])
    return residuals


def src_l1_classify(dictionary: Dictionary, Y: ObservationMatrix, base_cfg: BaselineConfig,
                    normalize: bool = True) -> ClassificationResult:
    """l1 code per view, class-restricted residual per view, majority vote over views"""
    Y.check_against(dictionary)
    if normalize:
        Y = Y.normalized()

    costs = np.zeros(dictionary.num_classes)
    labels = []
    converged = True
    for t in range(Y.num_tasks):
        y = Y.task(t)
        solution = ista_l1(dictionary.atoms, y, base_cfg.l1_penalty,
                           base_cfg.max_iterations, base_cfg.step_tolerance)
        converged = converged and solution.converged
        residuals = class_residuals(dictionary, y, solution.code)
        costs += residuals
        labels.append(assign_class(residuals))

    predicted, votes = majority_vote(labels, dictionary.num_classes)
    return ClassificationResult(predicted_class=predicted, per_class_cost=costs,
                                votes=votes, converged=converged)


def classify_sample(dictionary: Dictionary, Y: ObservationMatrix, settings: ClassifierSettings,
                    seed: int) -> ClassificationResult:
    """Dispatch one test matrix to the configured method"""
    if settings.method == "michs":
        return classify(dictionary, Y, settings.params, settings.kappa_in, settings.kappa_out,
                        replace(settings.chain, seed=seed), assign_by=settings.assign_by,
                        normalize=settings.normalize)
    return src_l1_classify(dictionary, Y, settings.baseline, normalize=settings.normalize)


def _timed_sample(job) -> Tuple[ClassificationResult, float]:
    dictionary, Y, settings, seed = job
    start = time.perf_counter()
    result = classify_sample(dictionary, Y, settings, seed)
    return result, time.perf_counter() - start


def evaluate(dictionary: Dictionary, test_set: Sequence[Tuple[ObservationMatrix, int]],
             settings: ClassifierSettings, seed: int, workers: int = 1) -> EvaluationReport:
    """
    Classify every test matrix and summarize accuracy.

    Sample k is classified with seed ``derive_seed(seed, k)``, so the report
    does not depend on ``workers`` (joblib ``n_jobs``; -1 uses every core).
    """
    if len(test_set) == 0:
        raise DatasetError("test set is empty")
    require("workers", workers, Validator.worker_count)

    jobs = [(dictionary, Y, settings, derive_seed(seed, k)) for k, (Y, _) in enumerate(test_set)]
    if workers != 1:
        outcomes = Parallel(n_jobs=workers)(delayed(_timed_sample)(job) for job in jobs)
    else:
        outcomes = []
        for k, job in enumerate(jobs, start=1):
            outcomes.append(_timed_sample(job))
            if k % 50 == 0:
                logger.info(f"Classified {k}/{len(jobs)} test matrices")

    C = dictionary.num_classes
    confusion = np.zeros((C, C), dtype=np.int64)
    true_classes = []
    for (result, _), (_, true_class) in zip(outcomes, test_set):
        confusion[true_class - 1, result.predicted_class - 1] += 1
        true_classes.append(int(true_class))

    totals = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(totals > 0, np.diag(confusion) / np.maximum(totals, 1), np.nan)
    wall_times = tuple(elapsed for _, elapsed in outcomes)
    report = EvaluationReport(
        accuracy=float(np.trace(confusion)) / len(test_set),
        per_class_accuracy=per_class,
        confusion=confusion,
        mean_wall_time=float(np.mean(wall_times)),
        true_classes=tuple(true_classes),
        results=tuple(result for result, _ in outcomes),
        wall_times=wall_times,
    )
    logger.info(f"{settings.method}: accuracy {report.accuracy:.3f} over {report.num_samples} samples")
    return report
