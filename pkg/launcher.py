"""
michs launcher - command-line entry point.

Commands: synth, build-dict, classify, benchmark, chain-trace.
Exit codes: 0 success, 2 configuration error, 1 runtime error.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dataset.images import load_image_directory
from dataset.protocol import ExperimentSpec, sample_test_matrices
from dataset.records import LabeledVector, as_training_pairs, first_per_class, restrict_classes
from dataset.store import (
    load_dictionary,
    load_manifest_vectors,
    results_header,
    save_dictionary,
    save_vectors,
    write_confusion,
    write_table,
)
from dataset.synthetic import SyntheticSpec, generate_synthetic
from michs.classifier import BaselineConfig, ClassifierSettings, EvaluationReport, evaluate
from michs.model import Dictionary, PriorParams, build_dictionary, build_inclusion_matrix
from michs.sampler import ChainConfig, iter_trace_rows, run_chain, select_support
from shared.config import RunConfig, load_run_config
from shared.constants import (
    ACCURACY_BY_TPC_FILE,
    ACCURACY_BY_VIEWS_FILE,
    APP_NAME,
    ASSIGN_BY_CHOICES,
    APP_VERSION,
    BENCHMARK_CELL_COLUMNS,
    BENCHMARK_CELLS_FILE,
    CHAIN_TRACE_COLUMNS,
    CHAIN_TRACE_FILE,
    DEFAULT_CONFIG_FILE,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_RUNTIME_ERROR,
    INCLUSION_FREQ_COLUMNS,
    INCLUSION_FREQ_FILE,
    METHOD_CHOICES,
    RESULTS_FILE,
    TEST_MANIFEST_FILE,
    TEST_MATRIX_FILE,
    TRAIN_MANIFEST_FILE,
    TRAIN_MATRIX_FILE,
)
from shared.exceptions import ConfigError, MichsError
from shared.grid_parser import parse_grid
from shared.utils import current_datetime_utc

logger = logging.getLogger(__name__)


def _grid(text: str) -> Tuple[int, ...]:
    try:
        return tuple(parse_grid(text))
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _methods(text: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="settings file (default: ./config.ini if present)")
    common.add_argument("--seed", type=int, help="master seed for every random stream")
    common.add_argument("--out", metavar="DIR", help="output directory")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="warnings and errors only")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--assign-by", dest="assign_by", choices=ASSIGN_BY_CHOICES)
    solver.add_argument("--classes", dest="class_subset", type=int, metavar="N",
                        help="restrict to the first N classes")
    solver.add_argument("--workers", type=int, help="worker processes for evaluation")
    solver.add_argument("--timing", action="store_true", default=None,
                        help="fill wall-clock columns (makes output non-reproducible)")
    solver.add_argument("--dict", dest="dict_dir", metavar="DIR", help="dictionary directory")
    solver.add_argument("--test", dest="test_manifest", metavar="MANIFEST", help="test manifest")

    parser = argparse.ArgumentParser(prog=APP_NAME, description="Multi-task spike-and-slab image classification")
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", parents=[common], help="generate a synthetic multi-view dataset")
    synth.add_argument("--classes", dest="num_classes", type=int)
    synth.add_argument("--tpc", type=int, help="training vectors per class")
    synth.add_argument("--dim", dest="feature_dim", type=int)
    synth.add_argument("--views-per-subject", dest="views_per_subject", type=int)
    synth.add_argument("--noise", dest="noise_std", type=float)
    synth.add_argument("--coherence", type=float)

    build = commands.add_parser("build-dict", parents=[common], help="build a dictionary from training data")
    source = build.add_mutually_exclusive_group()
    source.add_argument("--train", dest="train_manifest", metavar="MANIFEST")
    source.add_argument("--images", dest="image_dir", metavar="DIR")
    build.add_argument("--tpc", type=int, help="keep the first N vectors per class")
    build.add_argument("--classes", dest="class_subset", type=int, metavar="N")

    classify = commands.add_parser("classify", parents=[common, solver], help="classify sampled test matrices")
    classify.add_argument("--method", choices=METHOD_CHOICES)
    classify.add_argument("--views", type=int, help="views per test matrix (T)")
    classify.add_argument("--trials", type=int, help="number of sampled test matrices")

    bench = commands.add_parser("benchmark", parents=[common, solver], help="accuracy over a method x T x TPC grid")
    bench.add_argument("--method", dest="bench_methods", type=_methods, help="comma-separated methods")
    bench.add_argument("--views", dest="bench_views", type=_grid, help="T grid, e.g. 1,3")
    bench.add_argument("--tpc", dest="bench_tpc", type=_grid, help="TPC grid, e.g. 3-7")
    bench.add_argument("--trials", dest="bench_trials", type=int)
    bench.add_argument("--train", dest="train_manifest", metavar="MANIFEST")

    trace = commands.add_parser("chain-trace", parents=[common], help="dump one Gibbs chain")
    trace.add_argument("--dict", dest="dict_dir", metavar="DIR")
    trace.add_argument("--test", dest="test_manifest", metavar="MANIFEST")
    trace.add_argument("--index", type=int, default=0, help="test vector to trace")
    trace.add_argument("--target-class", dest="target_class", type=int,
                       help="class hypothesis (default: the vector's own class)")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s',
                        stream=sys.stderr, force=True)


class MichsLauncher:
    """Runs one command against a validated RunConfig"""

    def __init__(self, config: RunConfig, out_dir: Optional[str] = None):
        self.config = config
        self.out_dir = Path(out_dir) if out_dir else None

    # Settings builders

    def prior_params(self) -> PriorParams:
        cfg = self.config
        return PriorParams(sigma2=cfg.sigma2, sigma_n2=cfg.sigma_n2, lam=cfg.lam)

    def chain_config(self, benchmark: bool = False) -> ChainConfig:
        cfg = self.config
        return ChainConfig(
            max_iter=cfg.bench_max_iter if benchmark else cfg.max_iter,
            burn_in=cfg.bench_burn_in if benchmark else cfg.burn_in,
            inclusion_threshold=cfg.threshold,
            seed=cfg.seed,
            thin=cfg.thin,
        )

    def baseline_config(self) -> BaselineConfig:
        cfg = self.config
        return BaselineConfig(cfg.l1_penalty, cfg.l1_max_iterations, cfg.l1_step_tolerance)

    def classifier_settings(self, method: Optional[str] = None, benchmark: bool = False) -> ClassifierSettings:
        cfg = self.config
        return ClassifierSettings(
            method=method or cfg.method,
            params=self.prior_params(),
            kappa_in=cfg.kappa_in,
            kappa_out=cfg.kappa_out,
            chain=self.chain_config(benchmark),
            baseline=self.baseline_config(),
            assign_by=cfg.assign_by,
            normalize=cfg.normalize,
        )

    def synthetic_spec(self, tpc: Optional[int] = None) -> SyntheticSpec:
        cfg = self.config
        return SyntheticSpec(
            num_classes=cfg.num_classes,
            atoms_per_class=tpc or cfg.tpc,
            feature_dim=cfg.feature_dim,
            views_per_subject=cfg.views_per_subject,
            subspace_dim=cfg.subspace_dim,
            noise_std=cfg.noise_std,
            coherence=cfg.coherence,
            seed=cfg.seed,
            within_class_std=cfg.within_class_std,
            view_distortion=cfg.view_distortion,
            test_per_view=cfg.test_per_view,
        )

    def experiment_spec(self, views: Optional[int] = None, trials: Optional[int] = None) -> ExperimentSpec:
        cfg = self.config
        return ExperimentSpec(views=views or cfg.views, num_trials=trials or cfg.trials,
                              seed=cfg.seed, class_subset=cfg.class_subset)

    def output_dir(self, default: str) -> Path:
        out = self.out_dir or Path(default)
        out.mkdir(parents=True, exist_ok=True)
        return out

    # Shared steps

    def _training_dictionary(self, train: Sequence[LabeledVector], class_names: Sequence[str],
                             tpc: Optional[int]) -> Dictionary:
        items = list(train)
        names = list(class_names)
        if self.config.class_subset is not None:
            if self.config.class_subset > len(names):
                raise ConfigError(f"classes ({self.config.class_subset}) exceeds the {len(names)} available classes")
            items = restrict_classes(items, self.config.class_subset)
            names = names[:self.config.class_subset]
        if tpc is not None:
            items = first_per_class(items, tpc)
        return build_dictionary(as_training_pairs(items), class_names=names)

    def _test_pool(self, dictionary: Dictionary) -> List[LabeledVector]:
        cfg = self.config
        manifest = cfg.test_manifest or str(Path(cfg.data_dir) / TEST_MANIFEST_FILE)
        names = dictionary.class_names or None
        pool, _ = load_manifest_vectors(manifest, class_names=names, target_size=cfg.target_size)
        return pool

    def _write_results(self, path: Path, report: EvaluationReport, num_classes: int) -> None:
        rows = []
        for k, (result, true_class, elapsed) in enumerate(
                zip(report.results, report.true_classes, report.wall_times)):
            wall = f"{elapsed * 1000.0:.3f}" if self.config.timing else ""
            rows.append([k, true_class, result.predicted_class] + list(result.per_class_cost) + [wall])
        write_table(path, results_header(num_classes), rows)

    # Commands

    def cmd_synth(self) -> int:
        spec = self.synthetic_spec()
        data = generate_synthetic(spec)
        out = self.output_dir(self.config.data_dir)
        save_vectors(data.train, data.class_names, out / TRAIN_MATRIX_FILE, out / TRAIN_MANIFEST_FILE)
        save_vectors(data.test_pool, data.class_names, out / TEST_MATRIX_FILE, out / TEST_MANIFEST_FILE)
        print(f"Wrote {len(data.train)} training and {len(data.test_pool)} test vectors to {out}")
        return EXIT_OK

    def cmd_build_dict(self, tpc: Optional[int] = None) -> int:
        cfg = self.config
        if tpc is not None and tpc < 1:
            raise ConfigError(f"tpc: Must be at least 1 (got {tpc})")
        if cfg.image_dir:
            collection = load_image_directory(cfg.image_dir, cfg.target_size)
            train, names = collection.items, collection.class_names
        else:
            manifest = cfg.train_manifest or str(Path(cfg.data_dir) / TRAIN_MANIFEST_FILE)
            train, names = load_manifest_vectors(manifest, target_size=cfg.target_size)
        dictionary = self._training_dictionary(train, names, tpc)
        out = self.output_dir(cfg.dict_dir)
        save_dictionary(dictionary, out)
        print(f"Dictionary: m={dictionary.m} n={dictionary.n} C={dictionary.num_classes} -> {out}")
        return EXIT_OK

    def cmd_classify(self) -> int:
        cfg = self.config
        dictionary = load_dictionary(cfg.dict_dir)
        pool = self._test_pool(dictionary)
        if cfg.class_subset is not None:
            if cfg.class_subset > dictionary.num_classes:
                raise ConfigError(f"classes ({cfg.class_subset}) exceeds the {dictionary.num_classes} dictionary classes")
            dictionary = dictionary.restrict(range(1, cfg.class_subset + 1))
        samples = sample_test_matrices(pool, self.experiment_spec(), dictionary.class_names)
        settings = self.classifier_settings()
        report = evaluate(dictionary, samples, settings, cfg.seed, workers=cfg.workers)

        for k, (result, true_class) in enumerate(zip(report.results, report.true_classes)):
            costs = " ".join(f"{v:.6g}" for v in result.per_class_cost)
            print(f"sample {k}: true={true_class} predicted={result.predicted_class} costs=[{costs}]")
        print(f"accuracy={report.accuracy:.4f} ({report.num_samples} samples, method={settings.method})")

        out = self.output_dir(cfg.out_dir)
        self._write_results(out / RESULTS_FILE, report, dictionary.num_classes)
        return EXIT_OK

    def _benchmark_data(self) -> Tuple[List[LabeledVector], Tuple[str, ...], List[LabeledVector]]:
        """Training vectors (max TPC per class) and test pool shared by every cell"""
        cfg = self.config
        if cfg.train_manifest:
            train, names = load_manifest_vectors(cfg.train_manifest, target_size=cfg.target_size)
            manifest = cfg.test_manifest or str(Path(cfg.train_manifest).parent / TEST_MANIFEST_FILE)
            pool, _ = load_manifest_vectors(manifest, class_names=names, target_size=cfg.target_size)
            return train, names, pool
        data = generate_synthetic(self.synthetic_spec(tpc=max(cfg.bench_tpc)))
        return list(data.train), data.class_names, list(data.test_pool)

    def cmd_benchmark(self) -> int:
        cfg = self.config
        train, names, pool = self._benchmark_data()

        cells: Dict[Tuple[str, int, int], EvaluationReport] = {}
        for tpc in cfg.bench_tpc:
            dictionary = self._training_dictionary(train, names, tpc)
            for views in cfg.bench_views:
                samples = sample_test_matrices(pool, self.experiment_spec(views, cfg.bench_trials),
                                               dictionary.class_names)
                for method in cfg.bench_methods:
                    logger.info(f"Benchmark cell method={method} T={views} TPC={tpc}")
                    settings = self.classifier_settings(method, benchmark=True)
                    cells[(method, views, tpc)] = evaluate(dictionary, samples, settings,
                                                           cfg.seed, workers=cfg.bench_workers)

        out = self.output_dir(cfg.out_dir)
        rows = []
        for (method, views, tpc), report in cells.items():
            wall = f"{report.mean_wall_time * 1000.0:.3f}" if cfg.timing else ""
            rows.append([method, views, tpc, report.num_samples, report.accuracy, wall])
            class_names = names[:cfg.class_subset] if cfg.class_subset else names
            write_confusion(out / f"confusion_{method}_T{views}_TPC{tpc}.csv", report.confusion, class_names)
        write_table(out / BENCHMARK_CELLS_FILE, BENCHMARK_CELL_COLUMNS, rows)

        # Marginal tables: T at the largest TPC, TPC at the largest T
        top_tpc, top_views = max(cfg.bench_tpc), max(cfg.bench_views)
        write_table(out / ACCURACY_BY_VIEWS_FILE, ["method"] + [f"T={t}" for t in cfg.bench_views],
                    [[m] + [cells[(m, t, top_tpc)].accuracy for t in cfg.bench_views] for m in cfg.bench_methods])
        write_table(out / ACCURACY_BY_TPC_FILE, ["method"] + [f"TPC={k}" for k in cfg.bench_tpc],
                    [[m] + [cells[(m, top_views, k)].accuracy for k in cfg.bench_tpc] for m in cfg.bench_methods])

        for (method, views, tpc), report in cells.items():
            print(f"{method:8s} T={views} TPC={tpc}: accuracy={report.accuracy:.4f}")
        return EXIT_OK

    def cmd_chain_trace(self, index: int = 0, target_class: Optional[int] = None) -> int:
        cfg = self.config
        dictionary = load_dictionary(cfg.dict_dir)
        pool = self._test_pool(dictionary)
        if not 0 <= index < len(pool):
            raise ConfigError(f"index {index} outside the {len(pool)} test vectors")
        item = pool[index]
        target = target_class or item.class_id
        if target not in dictionary.class_ranges:
            raise ConfigError(f"target class {target} not in the dictionary")

        y = item.vector
        if cfg.normalize and np.linalg.norm(y) > 0:
            y = y / np.linalg.norm(y)
        K = build_inclusion_matrix(dictionary, target, 1, cfg.kappa_in, cfg.kappa_out)
        chain = replace(self.chain_config(), retain_samples=True)
        trace = run_chain(dictionary, y, K.row(0), self.prior_params(), chain)
        selected = select_support(trace, cfg.threshold)

        out = self.output_dir(cfg.out_dir)
        write_table(out / CHAIN_TRACE_FILE, CHAIN_TRACE_COLUMNS, iter_trace_rows(trace))
        write_table(out / INCLUSION_FREQ_FILE, INCLUSION_FREQ_COLUMNS, [
            [i, int(dictionary.class_of[i]), float(trace.inclusion_freq[i]), int(selected[i])]
            for i in range(dictionary.n)
        ])
        print(f"Traced {trace.samples_kept} samples of test vector {index} (class {item.class_id}) "
              f"under class {target}; selected {int(selected.sum())} atoms")
        return EXIT_OK


OVERRIDE_KEYS = (
    "seed", "method", "assign_by", "class_subset", "workers", "timing", "dict_dir", "test_manifest",
    "num_classes", "tpc", "feature_dim", "views_per_subject", "noise_std", "coherence",
    "train_manifest", "image_dir", "views", "trials", "bench_methods", "bench_views", "bench_tpc",
    "bench_trials",
)


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {key: getattr(args, key) for key in OVERRIDE_KEYS if getattr(args, key, None) is not None}
    # build-dict --tpc selects atoms per class, it does not change SyntheticSpec
    if args.command == "build-dict":
        overrides.pop("tpc", None)
    if args.command == "benchmark" and "workers" in overrides:
        overrides["bench_workers"] = overrides.pop("workers")
    if args.command == "benchmark" and "test_manifest" in overrides and "train_manifest" not in overrides:
        raise ConfigError("benchmark --test requires --train")
    return overrides


def config_path(explicit: Optional[str]) -> Optional[str]:
    """--config when given, otherwise ./config.ini if it exists"""
    if explicit is not None:
        return explicit
    if Path(DEFAULT_CONFIG_FILE).is_file():
        logger.info(f"Using {DEFAULT_CONFIG_FILE} from the working directory")
        return DEFAULT_CONFIG_FILE
    return None


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    logger.info("=" * 60)
    logger.info(f"{APP_NAME} v{APP_VERSION} - {args.command}")
    logger.info(f"Started {current_datetime_utc()} UTC")
    logger.info("=" * 60)

    config = load_run_config(config_path(args.config), collect_overrides(args))
    launcher = MichsLauncher(config, args.out)
    if args.command == "synth":
        return launcher.cmd_synth()
    if args.command == "build-dict":
        return launcher.cmd_build_dict(tpc=args.tpc)
    if args.command == "classify":
        return launcher.cmd_classify()
    if args.command == "benchmark":
        return launcher.cmd_benchmark()
    return launcher.cmd_chain_trace(index=args.index, target_class=args.target_class)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        return run(argv)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (MichsError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
