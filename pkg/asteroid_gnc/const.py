"""Constants for the asteroid station-keeping GNC package."""
from typing import Final

DOMAIN: Final = "asteroid_gnc"

# Environment
ENV_OUTPUT_DIR: Final = "ASTEROID_GNC_OUTPUT_DIR"
ENV_LOG_LEVEL: Final = "ASTEROID_GNC_LOG_LEVEL"
DEFAULT_OUTPUT_DIR: Final = "gnc_output"
DEFAULT_LOG_LEVEL: Final = "INFO"

# Physical constants
AU: Final = 1.495978707e11
MU_SUN: Final = 1.3271244e20
P_1AU: Final = 4.5e-6
G0: Final = 9.8066
ARCSEC: Final = 4.84813681109536e-6
DEG_PER_HOUR: Final = 4.84813681109536e-6

# Reference asteroid (433 Eros class)
DEFAULT_MU: Final = 4.4628e5
DEFAULT_SPIN_PERIOD_S: Final = 5.27 * 3600.0
DEFAULT_REFERENCE_RADIUS_M: Final = 16.0e3
DEFAULT_SUN_DISTANCE_AU: Final = 1.46
DEFAULT_SEMI_AXES_M: Final = (17.0e3, 5.5e3, 5.5e3)
DEFAULT_LANDMARK_COUNT: Final = 522

# Gravity coefficient files
NORMALIZATION_4PI: Final = "fully_normalized_4pi"
NORMALIZATIONS: Final = (NORMALIZATION_4PI,)

# Spacecraft
DEFAULT_MASS_KG: Final = 1000.0
DEFAULT_REFLECTIVITY: Final = 1.4
DEFAULT_SRP_AREA_M2: Final = 10.0
DEFAULT_ISP_S: Final = 2900.0
DEFAULT_ACCEL_MAX: Final = 0.01
DEFAULT_TORQUE_MAX: Final = 0.01
DEFAULT_ACTUATOR_RATE: Final = 0.1
DEFAULT_POINT_MASSES: Final = (
    ((8.0, 0.0, 0.0), 200.0),
    ((-2.0, -2.0, 0.0), 200.0),
    ((-2.0, 2.0, 0.0), 200.0),
    ((-2.0, 0.0, -1.0), 200.0),
    ((-2.0, 0.0, 1.0), 200.0),
)

# Camera, boresight along -x_B
DEFAULT_FOCAL_LENGTH_M: Final = 0.3
DEFAULT_FOV_DEG: Final = 30.0
DEFAULT_RESOLUTION_PX: Final = 2048
DEFAULT_CAMERA_MOUNT: Final = ((0.0, 0.0, 1.0), (0.0, 1.0, 0.0), (-1.0, 0.0, 0.0))

# Sensors datasheet
DEFAULT_PIXEL_SIGMA_PX: Final = 0.5
DEFAULT_LIDAR_SIGMA_M: Final = 5.0
DEFAULT_STAR_TRACKER_SIGMA_ARCSEC: Final = 10.0
DEFAULT_GYRO_SIGMA_DEG_H: Final = 0.05
DEFAULT_GYRO_BIAS_DEG_H: Final = (5.0, 5.0, 5.0)
DEFAULT_TRACKED_LANDMARKS: Final = 3
QUANTIZATION_VARIANCE_PX2: Final = 1.0 / 12.0

# Filters
DEFAULT_ORBIT_DEGREE: Final = 4
DEFAULT_ATTITUDE_DEGREE: Final = 2
DEFAULT_UKF_ALPHA: Final = 0.98
DEFAULT_UKF_THETA: Final = 1.0e-3
DEFAULT_UKF_BETA: Final = 2.0
DEFAULT_ORBIT_INTERVAL_S: Final = 36.0
DEFAULT_ATTITUDE_INTERVAL_S: Final = 3.6
DEFAULT_SIGMA_P_M: Final = 5.0
DEFAULT_SIGMA_MEE: Final = 5.0e-6
DEFAULT_SIGMA_GRAVITY: Final = 5.0e-3
DEFAULT_SIGMA_MRP: Final = 1.0e-6
DEFAULT_SIGMA_RATE: Final = 1.0e-8
DEFAULT_SIGMA_BIAS: Final = 2.42e-6
CHOLESKY_JITTER: Final = 1.0e-12

# Control
DEFAULT_ORBIT_HORIZON_S: Final = 240.0 * 60.0
DEFAULT_ORBIT_INTERVALS: Final = 40
DEFAULT_ATTITUDE_HORIZON_S: Final = 6.0 * 60.0
DEFAULT_ATTITUDE_INTERVALS: Final = 10
DEFAULT_TRACKING_WEIGHT: Final = 1.0e3
DEFAULT_QP_TOL: Final = 1.0e-10
DEFAULT_QP_MAX_ITER: Final = 500
FD_RELATIVE_STEP: Final = 1.0e-6
MEE_FD_FLOORS: Final = (1.0e-3, 1.0e-8, 1.0e-8, 1.0e-8, 1.0e-8, 1.0e-8)
ATTITUDE_FD_FLOORS: Final = (1.0e-8, 1.0e-8, 1.0e-8, 1.0e-10, 1.0e-10, 1.0e-10)

# Integrator
DEFAULT_INTEGRATOR: Final = "RK45"
DEFAULT_RTOL: Final = 1.0e-10
DEFAULT_ATOL_P: Final = 1.0e-9
DEFAULT_ATOL: Final = 1.0e-12

# Metrics
CONVERGENCE_THRESHOLD_PCT: Final = 20.0
RELEVANCE_THRESHOLD: Final = 2.0e-3
SECONDS_PER_DAY: Final = 86400.0
SECONDS_PER_HOUR: Final = 3600.0

# Modes
MODE_LEARNING: Final = "learning"
MODE_NONLEARNING: Final = "nonlearning"
MODES: Final = (MODE_LEARNING, MODE_NONLEARNING)

# Output files
HISTORY_FILE: Final = "history_{sat_id}.csv"
FUSED_FILE: Final = "fused_gravity.csv"
METRICS_FILE: Final = "metrics.yaml"
SCENARIO_COPY_FILE: Final = "scenario.yaml"
COMPARE_FILE: Final = "compare.yaml"
