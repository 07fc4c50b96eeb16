"""
Run configuration: built-in defaults <- config.ini <- command-line flags.

``config.ini`` groups keys by the module that owns them. Every key maps onto
one ``RunConfig`` field; unknown sections or keys are rejected so a typo
cannot silently fall back to a default.
"""

import configparser
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from shared import constants as c
from shared.exceptions import ConfigError
from shared.grid_parser import parse_grid
from shared.validation import Validator, check

logger = logging.getLogger(__name__)


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_names(text: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in str(text).split(",") if part.strip())


def _parse_grid(text: str) -> Tuple[int, ...]:
    return tuple(parse_grid(str(text)))


def _parse_optional_int(text: str) -> Optional[int]:
    text = str(text).strip()
    return None if text in ("", "0", "all") else int(text)


# (section, key) -> (field name, parser)
CONFIG_KEYS: Dict[Tuple[str, str], Tuple[str, Callable[[str], Any]]] = {
    ("prior", "sigma2"): ("sigma2", float),
    ("prior", "sigma_n2"): ("sigma_n2", float),
    ("prior", "lambda"): ("lam", float),
    ("prior", "kappa_in"): ("kappa_in", float),
    ("prior", "kappa_out"): ("kappa_out", float),
    ("chain", "max_iter"): ("max_iter", int),
    ("chain", "burn_in"): ("burn_in", int),
    ("chain", "thin"): ("thin", int),
    ("chain", "threshold"): ("threshold", float),
    ("baseline", "l1_penalty"): ("l1_penalty", float),
    ("baseline", "max_iterations"): ("l1_max_iterations", int),
    ("baseline", "step_tolerance"): ("l1_step_tolerance", float),
    ("classify", "method"): ("method", str),
    ("classify", "assign_by"): ("assign_by", str),
    ("classify", "normalize"): ("normalize", _parse_bool),
    ("classify", "workers"): ("workers", int),
    ("classify", "timing"): ("timing", _parse_bool),
    ("synth", "classes"): ("num_classes", int),
    ("synth", "tpc"): ("tpc", int),
    ("synth", "dim"): ("feature_dim", int),
    ("synth", "views_per_subject"): ("views_per_subject", int),
    ("synth", "subspace_dim"): ("subspace_dim", int),
    ("synth", "noise_std"): ("noise_std", float),
    ("synth", "coherence"): ("coherence", float),
    ("synth", "within_class_std"): ("within_class_std", float),
    ("synth", "view_distortion"): ("view_distortion", float),
    ("synth", "test_per_view"): ("test_per_view", int),
    ("experiment", "seed"): ("seed", int),
    ("experiment", "views"): ("views", int),
    ("experiment", "trials"): ("trials", int),
    ("experiment", "classes"): ("class_subset", _parse_optional_int),
    ("experiment", "target_height"): ("target_height", int),
    ("experiment", "target_width"): ("target_width", int),
    ("benchmark", "methods"): ("bench_methods", _parse_names),
    ("benchmark", "views"): ("bench_views", _parse_grid),
    ("benchmark", "tpc"): ("bench_tpc", _parse_grid),
    ("benchmark", "trials"): ("bench_trials", int),
    ("benchmark", "max_iter"): ("bench_max_iter", int),
    ("benchmark", "burn_in"): ("bench_burn_in", int),
    ("benchmark", "workers"): ("bench_workers", int),
    ("paths", "data_dir"): ("data_dir", str),
    ("paths", "dict_dir"): ("dict_dir", str),
    ("paths", "out_dir"): ("out_dir", str),
    ("paths", "train_manifest"): ("train_manifest", str),
    ("paths", "test_manifest"): ("test_manifest", str),
    ("paths", "image_dir"): ("image_dir", str),
}


@dataclass(frozen=True)
class RunConfig:
    # prior
    sigma2: float = c.DEFAULT_SIGMA2
    sigma_n2: float = c.DEFAULT_SIGMA_N2
    lam: float = c.DEFAULT_LAMBDA
    kappa_in: float = c.DEFAULT_KAPPA_IN
    kappa_out: float = c.DEFAULT_KAPPA_OUT
    # chain
    max_iter: int = c.DEFAULT_MAX_ITER
    burn_in: int = c.DEFAULT_BURN_IN
    thin: int = c.DEFAULT_THIN
    threshold: float = c.DEFAULT_INCLUSION_THRESHOLD
    # baseline
    l1_penalty: float = c.DEFAULT_L1_PENALTY
    l1_max_iterations: int = c.DEFAULT_L1_MAX_ITERATIONS
    l1_step_tolerance: float = c.DEFAULT_L1_STEP_TOLERANCE
    # classify
    method: str = c.DEFAULT_METHOD
    assign_by: str = c.DEFAULT_ASSIGN_BY
    normalize: bool = True
    workers: int = 1
    timing: bool = False
    # synth
    num_classes: int = c.DEFAULT_NUM_CLASSES
    tpc: int = c.DEFAULT_TPC
    feature_dim: int = c.DEFAULT_FEATURE_DIM
    views_per_subject: int = c.DEFAULT_VIEWS_PER_SUBJECT
    subspace_dim: int = c.DEFAULT_SUBSPACE_DIM
    noise_std: float = c.DEFAULT_NOISE_STD
    coherence: float = c.DEFAULT_COHERENCE
    within_class_std: float = c.DEFAULT_WITHIN_CLASS_STD
    view_distortion: float = c.DEFAULT_VIEW_DISTORTION
    test_per_view: int = c.DEFAULT_TEST_PER_VIEW
    # experiment
    seed: int = c.DEFAULT_SEED
    views: int = c.DEFAULT_VIEWS_T
    trials: int = c.DEFAULT_NUM_TRIALS
    class_subset: Optional[int] = None
    target_height: int = c.DEFAULT_TARGET_SIZE[0]
    target_width: int = c.DEFAULT_TARGET_SIZE[1]
    # benchmark
    bench_methods: Tuple[str, ...] = c.METHOD_CHOICES
    bench_views: Tuple[int, ...] = c.DEFAULT_BENCH_VIEWS
    bench_tpc: Tuple[int, ...] = c.DEFAULT_BENCH_TPC
    bench_trials: int = c.DEFAULT_NUM_TRIALS
    bench_max_iter: int = c.DEFAULT_BENCH_MAX_ITER
    bench_burn_in: int = c.DEFAULT_BENCH_BURN_IN
    bench_workers: int = c.DEFAULT_BENCH_WORKERS
    # paths
    data_dir: str = "data"
    dict_dir: str = "data"
    out_dir: str = "results"
    train_manifest: str = ""
    test_manifest: str = ""
    image_dir: str = ""

    @property
    def target_size(self) -> Tuple[int, int]:
        return self.target_height, self.target_width

    def problems(self) -> List[str]:
        """Every violated precondition, in field order"""
        found: List[str] = []
        positive = Validator.positive
        unit = Validator.open_unit_interval
        for name in ("sigma2", "sigma_n2", "lam", "l1_step_tolerance"):
            found += check(name, getattr(self, name), positive)
        for name in ("kappa_in", "kappa_out", "threshold"):
            found += check(name, getattr(self, name), unit)
        for name in ("noise_std", "within_class_std", "view_distortion", "l1_penalty"):
            found += check(name, getattr(self, name), Validator.non_negative)
        found += check("coherence", self.coherence, Validator.half_open_unit_interval)
        found += check("workers", self.workers, Validator.worker_count)
        found += check("benchmark workers", self.bench_workers, Validator.worker_count)
        for name in ("max_iter", "thin", "l1_max_iterations", "num_classes", "tpc",
                     "feature_dim", "views_per_subject", "subspace_dim", "test_per_view", "views",
                     "trials", "target_height", "target_width", "bench_trials", "bench_max_iter"):
            found += check(name, getattr(self, name), Validator.at_least(1))
        for name in ("burn_in", "bench_burn_in", "seed"):
            found += check(name, getattr(self, name), Validator.at_least(0))
        found += check("method", self.method, Validator.choice(c.METHOD_CHOICES))
        found += check("assign_by", self.assign_by, Validator.choice(c.ASSIGN_BY_CHOICES))
        if self.class_subset is not None:
            found += check("classes", self.class_subset, Validator.at_least(2))

        found += check("benchmark methods", self.bench_methods, Validator.non_empty)
        for method in self.bench_methods:
            found += check("benchmark methods", method, Validator.choice(c.METHOD_CHOICES))
        found += check("benchmark views", self.bench_views, Validator.non_empty)
        found += check("benchmark tpc", self.bench_tpc, Validator.non_empty)
        if any(v < 1 for v in self.bench_views):
            found.append(f"benchmark views: Must be at least 1 (got {self.bench_views!r})")
        if any(v < 1 for v in self.bench_tpc):
            found.append(f"benchmark tpc: Must be at least 1 (got {self.bench_tpc!r})")

        if not found:
            if self.burn_in >= self.max_iter:
                found.append(f"burn_in ({self.burn_in}) must be smaller than max_iter ({self.max_iter})")
            if self.bench_burn_in >= self.bench_max_iter:
                found.append(f"benchmark burn_in ({self.bench_burn_in}) must be smaller than "
                             f"benchmark max_iter ({self.bench_max_iter})")
            if self.kappa_out > self.kappa_in:
                found.append(f"kappa_out ({self.kappa_out}) must not exceed kappa_in ({self.kappa_in})")
            if self.subspace_dim > self.feature_dim:
                found.append(f"subspace_dim ({self.subspace_dim}) cannot exceed dim ({self.feature_dim})")
            if self.class_subset is not None and self.class_subset > self.num_classes:
                found.append(f"classes ({self.class_subset}) exceeds the {self.num_classes} synthetic classes")
        return found

    def validate(self) -> "RunConfig":
        """Raise one ConfigError listing every problem"""
        found = self.problems()
        if found:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(found), problems=found)
        return self


def _apply(config: RunConfig, values: Dict[str, Any]) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown settings: {', '.join(unknown)}")
    return replace(config, **values)


def read_config_file(path) -> Dict[str, Any]:
    """Parse a config.ini into RunConfig field values; collects every bad entry"""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            parser.read_file(f)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    except configparser.Error as e:
        raise ConfigError(f"malformed config file {path}: {e}")

    values: Dict[str, Any] = {}
    found: List[str] = []
    for section in parser.sections():
        for key, raw in parser.items(section):
            entry = CONFIG_KEYS.get((section, key))
            if entry is None:
                found.append(f"[{section}] {key}: unknown setting")
                continue
            name, convert = entry
            try:
                values[name] = convert(raw)
            except (TypeError, ValueError) as e:
                found.append(f"[{section}] {key}: {e}")
    if found:
        raise ConfigError(f"invalid config file {path}:\n  " + "\n  ".join(found), problems=found)
    return values


def load_run_config(path=None, overrides: Optional[Dict[str, Any]] = None,
                    validate: bool = True) -> RunConfig:
    """
    Defaults, then the file at ``path`` (if any), then ``overrides``.

    ``None`` values in ``overrides`` mean "flag not given" and are skipped.
    """
    config = RunConfig()
    if path is not None:
        if not Path(path).exists():
            raise ConfigError(f"config file {path} not found")
        config = _apply(config, read_config_file(path))
        logger.debug(f"Loaded configuration from {path}")
    if overrides:
        config = _apply(config, {k: v for k, v in overrides.items() if v is not None})
    return config.validate() if validate else config
