TOL_HERM = 1e-10
TOL_PROJ = 1e-10
TOL = 1e-9
TOL_RECONSTRUCTION = 1e-9
TOL_PROBABILITY_SUM = 1e-12
DEGENERACY_GAP = 1e-8
MIN_TRACE = 1e-12

MAX_TOTAL_DIM = 4096
MAX_SWEEPS = 100
MAX_HISTORIES = 4096
MAX_IDENTIFIERS = 64
EXHAUSTIVE_IDENTIFIERS_MAX = 16

CATCH_ALL_LABEL = "pi0"
POINTER_LABEL_PREFIX = "pi"
REFINEMENT_LABEL_PREFIX = "r"
DEFAULT_LABEL_PREFIX = "a"
