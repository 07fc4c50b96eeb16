"""
MAP refinement per class: chain -> support -> reduced ridge -> objective.

For one class the objective over all T tasks is

    L(X, Gamma) = (sigma2 / sigma_n2) ||Y - A X||_F^2 + lam ||X||_F^2 + sum_{t,i} gamma_ti rho_ti

and it separates into T independent task objectives. ``objective`` of a
ClassSolution is the sum of its task objectives in ascending task order.
"""

import itertools
import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from michs.model import (
    CodeMatrix,
    Dictionary,
    InclusionMatrix,
    ObservationMatrix,
    PriorParams,
    SupportMatrix,
    rho_matrix,
    spike_consistent,
)
from michs.sampler import ChainConfig, run_chain, select_support
from shared.exceptions import ConfigError, ContractError, DimensionError
from shared.utils import derive_seed

logger = logging.getLogger(__name__)

MAX_ENUMERATED_ATOMS = 16


@dataclass(frozen=True, eq=False)
class TaskSolution:
    """x*, gamma* and the objective value of one task"""

    code: np.ndarray
    support: np.ndarray
    task_objective: float
    mean_support_size: float = 0.0


@dataclass(frozen=True, eq=False)
class ClassSolution:
    """(X*, Gamma*, L_r) for one class hypothesis"""

    codes: CodeMatrix
    supports: SupportMatrix
    objective: float
    residual: float
    tasks: Tuple[TaskSolution, ...] = ()


def _as_support(gamma, n: int) -> np.ndarray:
    gamma = np.asarray(gamma)
    if gamma.shape != (n,):
        raise DimensionError(f"support has shape {gamma.shape}, expected ({n},)")
    if not np.all((gamma == 0) | (gamma == 1)):
        raise ConfigError("support entries must be 0 or 1")
    return gamma.astype(np.uint8)


def ridge_on_support(dictionary: Dictionary, y, gamma, params: PriorParams) -> np.ndarray:
    """
    Solve ((sigma2/sigma_n2) A_g^T A_g + lam I) x_g = (sigma2/sigma_n2) A_g^T y on the active set.

    The reduced solution is scattered back into a length-n vector; inactive
    coordinates stay exactly zero and an empty support gives the zero vector.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (dictionary.m,):
        raise DimensionError(f"observation has shape {y.shape}, expected ({dictionary.m},)")
    gamma = _as_support(gamma, dictionary.n)

    code = np.zeros(dictionary.n)
    active = np.flatnonzero(gamma)
    if active.size == 0:
        return code

    weight = params.data_weight
    reduced = dictionary.atoms[:, active]
    normal = weight * (reduced.T @ reduced) + params.lam * np.eye(active.size)
    factor = scipy.linalg.cho_factor(normal, lower=False, check_finite=False)
    code[active] = scipy.linalg.cho_solve(factor, weight * (reduced.T @ y), check_finite=False)
    return code


def task_objective(dictionary: Dictionary, y, x, gamma, rho_row, params: PriorParams) -> float:
    """(sigma2/sigma_n2) ||y - A x||^2 + lam ||x||^2 + sum over active i of rho_i"""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    gamma = np.asarray(gamma)
    rho_row = np.asarray(rho_row, dtype=np.float64)
    if x.shape != (dictionary.n,) or gamma.shape != (dictionary.n,) or rho_row.shape != (dictionary.n,):
        raise DimensionError("code, support and rho row must all have length n")
    if not spike_consistent(x, gamma):
        raise ContractError("coefficient is nonzero where the support is 0")

    residual = y - dictionary.atoms @ x
    data_term = params.data_weight * float(residual @ residual)
    ridge_term = params.lam * float(x @ x)
    penalty = float(np.sum(rho_row[gamma == 1]))
    return data_term + ridge_term + penalty


def matrix_objective(dictionary: Dictionary, Y: ObservationMatrix, X: CodeMatrix,
                     Gamma: SupportMatrix, rho_values: np.ndarray, params: PriorParams) -> float:
    """Frobenius form of the class objective over all tasks at once"""
    residual = Y.columns - dictionary.atoms @ X.values
    return (params.data_weight * float(np.sum(residual ** 2))
            + params.lam * float(np.sum(X.values ** 2))
            + float(np.sum(Gamma.flags.T * rho_values)))


def solve_task(dictionary: Dictionary, y, kappa_row, params: PriorParams, cfg: ChainConfig,
               rho_row: Optional[np.ndarray] = None) -> TaskSolution:
    """Find contributing atoms by Gibbs sampling, then their values by the reduced ridge"""
    kappa_row = np.asarray(kappa_row, dtype=np.float64)
    if rho_row is None:
        rho_row = rho_matrix(params, InclusionMatrix.from_array(kappa_row))[0]

    trace = run_chain(dictionary, y, kappa_row, params, cfg)
    support = select_support(trace, cfg.inclusion_threshold)
    code = ridge_on_support(dictionary, y, support, params)
    value = task_objective(dictionary, y, code, support, rho_row, params)
    return TaskSolution(code=code, support=support, task_objective=value,
                        mean_support_size=trace.mean_support_size)


def solve_class(dictionary: Dictionary, Y: ObservationMatrix, K: InclusionMatrix,
                params: PriorParams, cfg: ChainConfig,
                task_seeds: Optional[Sequence[int]] = None) -> ClassSolution:
    """
    Solve the T independent task problems of one class and assemble X*, Gamma*.

    Task t runs its chain on ``task_seeds[t]`` when given, otherwise on
    ``derive_seed(cfg.seed, t)``.
    """
    Y.check_against(dictionary)
    if K.num_tasks != Y.num_tasks:
        raise DimensionError(f"inclusion matrix has {K.num_tasks} rows for {Y.num_tasks} tasks")
    if K.n != dictionary.n:
        raise DimensionError(f"inclusion matrix has {K.n} columns for {dictionary.n} atoms")
    if task_seeds is not None and len(task_seeds) != Y.num_tasks:
        raise DimensionError(f"{len(task_seeds)} task seeds given for {Y.num_tasks} tasks")

    rho_values = rho_matrix(params, K)
    tasks = []
    for t in range(Y.num_tasks):
        seed = task_seeds[t] if task_seeds is not None else derive_seed(cfg.seed, t)
        tasks.append(solve_task(dictionary, Y.task(t), K.row(t), params,
                                replace(cfg, seed=seed), rho_row=rho_values[t]))

    objective = 0.0
    for task in tasks:
        objective += task.task_objective

    codes = CodeMatrix.from_columns([task.code for task in tasks])
    supports = SupportMatrix.from_columns([task.support for task in tasks])
    residual = float(np.linalg.norm(Y.columns - dictionary.atoms @ codes.values))
    logger.debug(f"Class solve T={Y.num_tasks}: objective={objective:.6g} residual={residual:.6g} "
                 f"support sizes={[int(task.support.sum()) for task in tasks]}")
    return ClassSolution(codes=codes, supports=supports, objective=objective,
                         residual=residual, tasks=tuple(tasks))


def enumerate_supports(dictionary: Dictionary, y, rho_row,
                       params: PriorParams) -> Tuple[np.ndarray, np.ndarray, float]:
    """Exact MAP over all 2^n supports (small n only): (support, code, objective)"""
    n = dictionary.n
    if n > MAX_ENUMERATED_ATOMS:
        raise ConfigError(f"exhaustive search is limited to {MAX_ENUMERATED_ATOMS} atoms, got {n}")

    best = None
    for bits in itertools.product((0, 1), repeat=n):
        support = np.array(bits, dtype=np.uint8)
        code = ridge_on_support(dictionary, y, support, params)
        value = task_objective(dictionary, y, code, support, rho_row, params)
        if best is None or value < best[2]:
            best = (support, code, value)
    return best
