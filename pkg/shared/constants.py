# Application Constants

# Application Settings
APP_NAME = "michs"
APP_VERSION = "1.0.0"

# Prior hyperparameters
DEFAULT_SIGMA2 = 1.0
DEFAULT_SIGMA_N2 = 0.01
DEFAULT_LAMBDA = 1.0
DEFAULT_KAPPA_IN = 0.4
DEFAULT_KAPPA_OUT = 0.01

# Gibbs chain
DEFAULT_MAX_ITER = 5000
DEFAULT_BURN_IN = 500
DEFAULT_THIN = 1
DEFAULT_INCLUSION_THRESHOLD = 0.5
DEFAULT_SEED = 0

# SRC-l1 baseline
DEFAULT_L1_PENALTY = 0.05
DEFAULT_L1_MAX_ITERATIONS = 2000
DEFAULT_L1_STEP_TOLERANCE = 1e-6

# Classification
ASSIGN_BY_CHOICES = ("cost", "residual")
METHOD_CHOICES = ("michs", "src_l1")
DEFAULT_ASSIGN_BY = "cost"
DEFAULT_METHOD = "michs"

# Synthetic data
DEFAULT_NUM_CLASSES = 10
DEFAULT_TPC = 5
DEFAULT_FEATURE_DIM = 64
DEFAULT_VIEWS_PER_SUBJECT = 7
DEFAULT_SUBSPACE_DIM = 4
DEFAULT_NOISE_STD = 0.3
DEFAULT_COHERENCE = 0.3
DEFAULT_WITHIN_CLASS_STD = 0.3
DEFAULT_VIEW_DISTORTION = 0.5
DEFAULT_TEST_PER_VIEW = 1

# Experiment protocol
DEFAULT_VIEWS_T = 3
DEFAULT_NUM_TRIALS = 500
DEFAULT_TARGET_SIZE = (32, 32)

# Benchmark grid
DEFAULT_BENCH_VIEWS = (1, 3)
DEFAULT_BENCH_TPC = (3, 5, 7)
DEFAULT_BENCH_MAX_ITER = 100
DEFAULT_BENCH_BURN_IN = 30
DEFAULT_BENCH_WORKERS = -1

# Files
DEFAULT_CONFIG_FILE = "config.ini"
MATRIX_SUFFIX = ".csv"
DICTIONARY_FILE = "dictionary.csv"
DICTIONARY_CLASSES_FILE = "dictionary_classes.txt"
CLASS_NAMES_FILE = "classes.csv"
TRAIN_MATRIX_FILE = "train_matrix.csv"
TEST_MATRIX_FILE = "test_matrix.csv"
TRAIN_MANIFEST_FILE = "train_manifest.csv"
TEST_MANIFEST_FILE = "test_manifest.csv"
RESULTS_FILE = "results.csv"
BENCHMARK_CELLS_FILE = "benchmark_cells.csv"
ACCURACY_BY_VIEWS_FILE = "accuracy_by_views.csv"
ACCURACY_BY_TPC_FILE = "accuracy_by_tpc.csv"
CHAIN_TRACE_FILE = "chain_trace.csv"
INCLUSION_FREQ_FILE = "inclusion_freq.csv"

# CSV schemas
MANIFEST_COLUMNS = ["path", "class_name", "view_tag"]
CHAIN_TRACE_COLUMNS = ["iteration", "atom_index", "gamma_value"]
INCLUSION_FREQ_COLUMNS = ["atom_index", "class_id", "inclusion_freq", "selected"]
BENCHMARK_CELL_COLUMNS = ["method", "views", "tpc", "samples", "accuracy", "mean_wall_ms"]

# Exit codes
EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_CONFIG_ERROR = 2
