import re

# DIMENSION
MIN_DIMENSION = 3

# SOLVER
DEFAULT_TOL = 1e-10
DEFAULT_MAX_NEWTON = 50
MAX_HALVINGS = 30
DEFAULT_RADIAL_GRID = 4096
DEFAULT_AXISYMMETRIC_GRID = 512
MIN_GRID = 64
DEFAULT_GRADING = 1.05
# The grading ratio is the spacing growth per cell of a grid with this many
# cells; finer grids refine the same spacing function.
GRADING_REFERENCE_CELLS = 64
# Cells across the smallest excised radius at the reference grid size.
BALL_CELLS = 8
CUT_CELL_MIN_FRACTION = 0.05
LINEAR_RTOL = 1e-12
MONOTONE_SWEEP_FACTOR = 10
COMPARISON_SLACK = 10
MAX_PINNED_FRACTION = 0.01
ARMIJO = 1e-4
# Pseudo time stepping of v_t = F(v) ahead of Newton; steps are relative to
# the Jacobian diagonal.
PSEUDO_TIME_START = 1.0
PSEUDO_TIME_GROWTH = 1.5
PSEUDO_TIME_LIMIT = 1e8
PSEUDO_TIME_MAX_STEPS = 400
PSEUDO_TIME_WEIGHT_FLOOR = 1e-12
# Refinement errors at this level are solver noise and carry no order.
EXACT_ERROR = 1e-8
DEFAULT_CHART_TRUNCATION = 16.0

# CURVATURE
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50
ROUND_TRIP_RTOL = 1e-12

# PROBES
PATH_SAMPLES = 1024
DEFAULT_GROWTH = 1.2
THRESHOLD_FACTOR = 10
BOUNDED_BAND_FACTOR = 3
BLOWUP_WINDOW = 3
ARC_RADIUS_FACTOR = 4
ANNULUS_BOUNDARY_SAMPLES = 64

# EXHAUSTION
DEFAULT_ANNULUS_DELTA = 1.0
NEAR_RADIUS = 0.1
FAR_RADIUS = 0.5
DEFAULT_FIT_SHELL = (0.3, 0.6)
GRAM_CONDITION_LIMIT = 1e12
BOUNDARY_LAYER_NODES = 8

# WORKERS
THREADS_ENV = 'YAMABE_LAB_THREADS'

# FIELD RECORDS
FIELD_MAGIC = b'YMBF'
FIELD_FORMAT_VERSION = 1
FIELD_HEADER = '<4sHHI'
FIELD_DIR = 'fields'
FIELD_NAME_REGEX = re.compile(r'^(\d{4})_(upper|lower)\.bin$')

# REPORT
RUN_CSV = 'run.csv'
PLOT_SVG = 'plot.svg'
ORACLE_CSV = 'oracle.csv'
CONVERGENCE_CSV = 'convergence.csv'
FIT_CSV = 'fit.csv'
SCENARIO_COPY = 'scenario.toml'
CSV_COLUMNS = ('i', 'r_i', 'rhat_i', 'newton_iters', 'residual',
               'bracket_gap', 'm_i', 'sup_ric_near', 'sup_ric_far',
               'probe_id', 'probe_Rnn', 'pinch_flag', 'verdict')
SVG_HASH_SALT = 'yamabe-lab'

# EXIT CODES
EXIT_OK = 0
EXIT_ASSERTION = 2
EXIT_MISSING = 3
EXIT_SOLVER = 4

# LOGS
LOG_FILE = None
LOG_LEVEL = 'INFO'
