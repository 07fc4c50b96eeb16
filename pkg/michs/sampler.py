"""
Gibbs sampling over (x, gamma) for one class and one task.

Each iteration draws the active coefficients jointly from their Gaussian
posterior given the support, then sweeps gamma_1..gamma_n in order. A gamma
update integrates x_i out (collapsed step); when the atom is switched on its
coefficient is refreshed from the Gaussian conditional given the other
coefficients, when it is switched off the coefficient becomes exactly zero.
Both moves are exact conditionals of the joint posterior, so the gamma chain
targets f(gamma | y).

Bookkeeping uses the Gram matrix G = A^T A and c = A^T (y - A x); removing
atom i from the fit gives a_i^T r_(i) = c_i + G_ii x_i, and a change of x_i
costs one row update of c.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.special import logit

from michs.model import Dictionary, PriorParams
from shared.constants import (
    DEFAULT_BURN_IN,
    DEFAULT_INCLUSION_THRESHOLD,
    DEFAULT_MAX_ITER,
    DEFAULT_SEED,
    DEFAULT_THIN,
)
from shared.exceptions import ConfigError, ContractError, DimensionError
from shared.utils import make_rng
from shared.validation import Validator, require

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChainConfig:
    """Length, burn-in, thinning and seed of one Gibbs chain"""

    max_iter: int = DEFAULT_MAX_ITER
    burn_in: int = DEFAULT_BURN_IN
    inclusion_threshold: float = DEFAULT_INCLUSION_THRESHOLD
    seed: int = DEFAULT_SEED
    thin: int = DEFAULT_THIN
    retain_samples: bool = False

    def __post_init__(self):
        require("max_iter", self.max_iter, Validator.at_least(1))
        require("burn_in", self.burn_in, Validator.at_least(0))
        require("inclusion_threshold", self.inclusion_threshold, Validator.open_unit_interval)
        require("thin", self.thin, Validator.at_least(1))
        require("seed", self.seed, Validator.at_least(0))
        if self.burn_in >= self.max_iter:
            raise ConfigError(
                f"burn_in ({self.burn_in}) must be smaller than max_iter ({self.max_iter}) "
                "so that at least one sample is kept")

    @property
    def samples_kept(self) -> int:
        return -(-(self.max_iter - self.burn_in) // self.thin)


@dataclass(frozen=True, eq=False)
class ChainTrace:
    """Post-burn-in inclusion frequencies of one chain"""

    inclusion_freq: np.ndarray
    samples_kept: int
    initial_code: Optional[np.ndarray]
    mean_support_size: float
    gamma_samples: Optional[np.ndarray] = None
    kept_iterations: Optional[np.ndarray] = None
    flips_per_sweep: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.inclusion_freq.shape[0]


def _check_vector(name: str, vector: np.ndarray, length: int) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (length,):
        raise DimensionError(f"{name} has shape {vector.shape}, expected ({length},)")
    return vector


def _check_support(gamma, n: int) -> np.ndarray:
    gamma = np.asarray(gamma)
    if gamma.shape != (n,):
        raise DimensionError(f"support has shape {gamma.shape}, expected ({n},)")
    if not np.all((gamma == 0) | (gamma == 1)):
        raise ConfigError("support entries must be 0 or 1")
    return gamma.astype(np.uint8)


def _gaussian_posterior_draw(gram_active: np.ndarray, rhs_active: np.ndarray,
                             params: PriorParams, rng: np.random.Generator) -> np.ndarray:
    """One draw from N(P^-1 b, P^-1), P = G_SS / sigma_n2 + (lam / sigma2) I, b = A_S^T y / sigma_n2"""
    k = rhs_active.shape[0]
    precision = gram_active / params.sigma_n2 + (params.lam / params.sigma2) * np.eye(k)
    try:
        upper = scipy.linalg.cholesky(precision, lower=False, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise ContractError(f"posterior precision is not positive definite: {e}")
    mean = scipy.linalg.cho_solve((upper, False), rhs_active / params.sigma_n2, check_finite=False)
    noise = rng.standard_normal(k)
    return mean + scipy.linalg.solve_triangular(upper, noise, lower=False, check_finite=False)


def sample_code_given_support(dictionary: Dictionary, y, gamma, params: PriorParams,
                              rng: np.random.Generator) -> np.ndarray:
    """Draw x from f(x | y, gamma); inactive coordinates are exactly zero"""
    y = _check_vector("observation", y, dictionary.m)
    gamma = _check_support(gamma, dictionary.n)

    code = np.zeros(dictionary.n)
    active = np.flatnonzero(gamma)
    if active.size == 0:
        return code

    atoms_active = dictionary.atoms[:, active]
    code[active] = _gaussian_posterior_draw(
        atoms_active.T @ atoms_active, atoms_active.T @ y, params, rng)
    return code


def _collapsed_terms(norm2: np.ndarray, kappa: np.ndarray,
                     params: PriorParams) -> Tuple[np.ndarray, np.ndarray]:
    """Offset and quadratic coefficient of the collapsed gamma log-odds"""
    tau2 = params.slab_variance
    shrink = 1.0 + tau2 * norm2 / params.sigma_n2
    offset = logit(kappa) - 0.5 * np.log(shrink)
    quadratic = tau2 / (2.0 * params.sigma_n2 ** 2 * shrink)
    return offset, quadratic


def support_log_odds(dictionary: Dictionary, residual_excl_i, atom_index: int,
                     params: PriorParams, kappa_i: float) -> float:
    """
    log p(gamma_i = 1 | rest) - log p(gamma_i = 0 | rest) with x_i integrated out.

    ``residual_excl_i`` is y minus the fit of every other active atom.
    """
    residual = _check_vector("residual", residual_excl_i, dictionary.m)
    if not 0 <= atom_index < dictionary.n:
        raise DimensionError(f"atom index {atom_index} outside [0, {dictionary.n})", index=atom_index)
    require("kappa_i", kappa_i, Validator.open_unit_interval)

    atom = dictionary.atoms[:, atom_index]
    offset, quadratic = _collapsed_terms(
        np.array([atom @ atom]), np.array([float(kappa_i)]), params)
    projection = float(atom @ residual)
    return float(offset[0] + quadratic[0] * projection * projection)


def ridge_initial_code(gram: np.ndarray, aty: np.ndarray, params: PriorParams) -> np.ndarray:
    """Ridge estimate (A^T A + (lam sigma_n2 / sigma2) I)^-1 A^T y used as x^(0)"""
    n = gram.shape[0]
    regularized = gram + (params.lam * params.sigma_n2 / params.sigma2) * np.eye(n)
    factor = scipy.linalg.cho_factor(regularized, lower=False, check_finite=False)
    return scipy.linalg.cho_solve(factor, aty, check_finite=False)


def run_chain(dictionary: Dictionary, y, kappa_row, params: PriorParams,
              cfg: ChainConfig) -> ChainTrace:
    """
    Systematic-scan Gibbs chain started from gamma = (1, ..., 1) and the ridge estimate.

    The first sweep redraws x given the full support, so the ridge start never
    reaches the frequencies; it is computed and returned as ``initial_code``
    only when ``cfg.retain_samples`` is set.
    """
    n = dictionary.n
    y = _check_vector("observation", y, dictionary.m)
    kappa_row = _check_vector("kappa row", kappa_row, n)
    if not np.all((kappa_row > 0.0) & (kappa_row < 1.0)):
        raise ConfigError("every inclusion probability must lie strictly between 0 and 1")

    atoms = dictionary.atoms
    gram = np.ascontiguousarray(atoms.T @ atoms)
    aty = atoms.T @ y
    norm2 = np.diag(gram).copy()

    offset, quadratic = _collapsed_terms(norm2, kappa_row, params)
    cond_precision = norm2 / params.sigma_n2 + params.lam / params.sigma2
    cond_scale = 1.0 / (params.sigma_n2 * cond_precision)
    cond_sd = 1.0 / np.sqrt(cond_precision)

    # x^(0) is overwritten by the first x | gamma draw; only diagnostics read it
    initial_code = ridge_initial_code(gram, aty, params) if cfg.retain_samples else None
    rng = make_rng(cfg.seed)

    gamma = np.ones(n, dtype=np.uint8)
    code = np.zeros(n)
    counts = np.zeros(n)
    kept = 0
    support_total = 0
    flips = np.zeros(cfg.max_iter, dtype=np.int64)
    retained = [] if cfg.retain_samples else None
    iterations = [] if cfg.retain_samples else None

    for j in range(1, cfg.max_iter + 1):
        # (1) x | gamma
        active = np.flatnonzero(gamma)
        code[:] = 0.0
        if active.size:
            code[active] = _gaussian_posterior_draw(
                gram[np.ix_(active, active)], aty[active], params, rng)
            corr = aty - gram[:, active] @ code[active]
        else:
            corr = aty.copy()

        # (2) gamma_i | y, x, gamma_(i), i = 1..n
        thresholds = logit(rng.random(n))
        noise = rng.standard_normal(n)
        previous = gamma.copy()
        start = 0
        while start < n:
            # An atom that stays off with x_i = 0 leaves c unchanged, so the
            # tail log-odds hold until the first atom whose x_i changes.
            projection = corr[start:] + norm2[start:] * code[start:]
            switched_on = thresholds[start:] < offset[start:] + quadratic[start:] * projection * projection
            moves = np.flatnonzero(switched_on | (code[start:] != 0.0))
            if moves.size == 0:
                gamma[start:] = 0
                break
            i = start + int(moves[0])
            gamma[start:i] = 0
            if switched_on[i - start]:
                gamma[i] = 1
                updated = cond_scale[i] * projection[i - start] + cond_sd[i] * noise[i]
            else:
                gamma[i] = 0
                updated = 0.0
            delta = updated - code[i]
            if delta != 0.0:
                corr -= gram[i] * delta
                code[i] = updated
            start = i + 1
        flips[j - 1] = np.count_nonzero(gamma != previous)

        if j > cfg.burn_in and (j - cfg.burn_in - 1) % cfg.thin == 0:
            counts += gamma
            kept += 1
            support_total += int(gamma.sum())
            if retained is not None:
                retained.append(gamma.copy())
                iterations.append(j)

    if kept == 0:
        raise ContractError("chain finished without keeping a sample")

    inclusion_freq = counts / kept
    inclusion_freq.flags.writeable = False
    mean_support = support_total / kept
    logger.debug(f"Chain seed={cfg.seed} kept={kept} mean support size={mean_support:.2f} "
                 f"mean flips per sweep={flips.mean():.2f}")

    return ChainTrace(
        inclusion_freq=inclusion_freq,
        samples_kept=kept,
        initial_code=initial_code,
        mean_support_size=mean_support,
        gamma_samples=np.array(retained, dtype=np.uint8) if retained is not None else None,
        kept_iterations=np.array(iterations, dtype=np.int64) if iterations is not None else None,
        flips_per_sweep=flips,
    )


def select_support(trace: ChainTrace, threshold: float) -> np.ndarray:
    """gamma*_i = 1 iff the inclusion frequency is strictly above threshold"""
    require("threshold", threshold, Validator.open_unit_interval)
    return (trace.inclusion_freq > threshold).astype(np.uint8)


def iter_trace_rows(trace: ChainTrace) -> Iterator[Tuple[int, int, int]]:
    """Yield (iteration, atom_index, gamma_value) for every retained sample"""
    if trace.gamma_samples is None:
        raise ConfigError("chain was run without retain_samples; no gamma sequence to dump")
    for iteration, sample in zip(trace.kept_iterations.tolist(), trace.gamma_samples):
        for atom_index, value in enumerate(sample.tolist()):
            yield iteration, atom_index, value

