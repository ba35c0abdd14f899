# mixing matrix validation
STOCHASTIC_TOLERANCE = 1e-12
SPECTRAL_TOLERANCE = 1e-10

RANDOM_GRAPH_RETRIES = 100

# relative band used when no explicit active tolerance is given:
# tol(x) = ACTIVE_RELATIVE_TOLERANCE * (1 + |f(x)|)
ACTIVE_RELATIVE_TOLERANCE = 1e-9

# finite-difference gradient checks
FD_RELATIVE_STEP = 1e-6
FD_RELATIVE_ERROR = 1e-5

# exact min-norm subgradient is computed up to this many active combinations
MAX_ACTIVE_COMBINATIONS = 16

MEAN_ITERATE_TOLERANCE = 1e-10
MEAN_ITERATE_VERIFY_EVERY = 100

DEFAULT_DIAGNOSTIC_CADENCE = 10
DEFAULT_EARLY_STOP_PATIENCE = 100

# default realization bound B = BOUND_SAFETY_FACTOR * (|g(x0)| + sqrt(R))
BOUND_SAFETY_FACTOR = 10.0

# 17 significant digits round-trip every double exactly
CSV_FLOAT_FORMAT = ".17g"

DEFAULT_OUTPUT_DIRECTORY = "./dsubgrad-output"

# seconds before a plotting subprocess is killed
PLOT_TIMEOUT = 300
