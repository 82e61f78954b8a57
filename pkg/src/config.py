"""
Configuration Module

This file stores the static numerical defaults shared by the solvers,
diagnostics and the command line.
"""

# Truncated y-grid half-extent; rho(y) <= exp(-25) on the boundary
DEFAULT_HALF_EXTENT = 10.0

# Nodes per axis (odd so the origin is a node)
DEFAULT_POINTS_PER_AXIS = 201

# Angular samples per sphere coordinate when extremizing G and |F|
DEFAULT_SPHERE_RESOLUTION = 4096

# Sphere extremization only for small component counts
MAX_SPHERE_COMPONENTS = 4

# Sup-norm level at which a physical run is declared blown up
DEFAULT_BLOWUP_THRESHOLD = 1e6

# Largest accepted relative sup-norm jump per physical step
GROWTH_LIMIT = 0.1

# Fraction of the explicit stability limit used for physical steps
DT_SAFETY = 0.9

# Default physical controls
DEFAULT_DT_INIT = 1e-3
DEFAULT_T_MAX = 10.0
DEFAULT_MAX_STEPS = 2_000_000
DEFAULT_SNAPSHOT_EVERY = 0

# Default rescaled controls
DEFAULT_DS = 5e-3
DEFAULT_S_MAX = 5.0
DEFAULT_FRAME_EVERY = 10

# RK4 stability reach along the spectrum of the discrete operators
RK4_STABILITY_RADIUS = 2.5

# Monitor defaults
DEFAULT_MONITOR_TOLERANCE = 1e-8
DEFAULT_IDENTITY_TOLERANCE_FACTOR = 10.0
DEFAULT_BUMP_COUNT = 9
DEFAULT_MASK_FRACTION = 1e-3

# Exponent arithmetic
LAMBDA_UPPER_MARGIN = "1e-6"
LAMBDA_BISECTION_TOLERANCE = "1e-9"

# Exit codes of the command line
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_BLOWUP = 3
EXIT_VERIFICATION = 4
EXIT_NUMERICAL = 5

# Default output directory for experiment artifacts
DEFAULT_OUTPUT_DIR = "outputs"
