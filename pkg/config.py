"""
Configuration settings for the minimax coding lab
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Runtime Configuration
LOG_LEVEL = os.getenv("MINIMAX_LOG_LEVEL", "INFO")
DEFAULT_THREADS = int(os.getenv("MINIMAX_THREADS", "1"))

# Quadrature Configuration
GL_NODES_1D = 512
GL_NODES_2D = 128
SIMPLEX_NODES = 96
PRIOR_NORMALIZATION_TOL = 1e-6
GH_NODES = 201
GH_RTOL = 1e-8
GH_MAX_NODES = 3201

# Linear Algebra Configuration
EIGENVALUE_FLOOR = 1e-12
FD_STEP = 1e-5

# Monte Carlo Configuration
MC_SEED = 0xC0FFEE
MC_SAMPLES = 1_000_000
# Per-node draws when an ideal-prior normalizer needs Monte Carlo factors
NORMALIZER_MC_SAMPLES = 20_000

# Strategy Defaults
TILT_HALF_WIDTH = 0.5
BETA_NODES = {1: 9, 2: 5}
THEOREM5_R = 0.5
THEOREM8_ALPHA = 0.25
THEOREM8_P = 0.9
THEOREM8_R = 0.02
COMPOSITE_MASS_TOL = 1e-12
PREDICTIVE_TOL = 1e-9

# MLE Configuration
MLE_TIE_TOL = 1e-9
MLE_GRID_1D = 101
MLE_GRID_2D = 21
MLE_NEWTON_STEPS = 8

# Regret Evaluation Configuration
GOOD_STRING_GAMMA = 0.2
ENUMERATION_GUARD = 10_000_000
REGRET_CSV_COLUMNS = [
    "n", "strategy", "max_regret_nats", "max_regret_bits", "argmax_counts",
    "asymptotic_nats", "gap_nats", "num_classes", "good_fraction",
]

# Coder Configuration
CODER_STATE_BITS = 62
FREQUENCY_BITS = 32
CONTAINER_MAGIC = b"MNMX1"

# Output Configuration
SIGNIFICANT_DIGITS = 12

# CLI Exit Codes
EXIT_OK = 0
EXIT_GUARD = 2
EXIT_USAGE = 64
EXIT_DATA = 65
