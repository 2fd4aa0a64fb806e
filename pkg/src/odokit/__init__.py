"""Windowed inertial odometry toolkit.

Three trackers over the same IMU streams: open-loop strapdown integration
(drifts cubically under sensor error), step-counting dead reckoning
(robust for pedestrians, blind to everything else), and a learned model
that regresses per-window polar displacement (distance, heading change)
with a from-scratch bidirectional LSTM, breaking continuous error
accumulation at window boundaries. A physics-exact simulator supplies
truth and corrupted sensor streams; metrics score any tracker against
truth on a common clock.
"""

from .errors import (
    AliasingError,
    AlignmentError,
    CorruptFileError,
    DegenerateHeadingError,
    DegenerateInputError,
    EmptyInputError,
    InsufficientDataError,
    InvalidInputError,
    ModelContractError,
    NumericOverflowError,
    OdokitError,
    OutOfRangeError,
    TrainingDivergedError,
    UnsupportedRateError,
    VersionMismatchError,
)
from .metrics import (
    ErrorSeries,
    error_at_distance,
    error_cdf,
    percentile_error,
    position_errors,
    resample_hold,
    truth_distance,
)
from .network import (
    ModelParams,
    adam_init,
    adam_update,
    forward_batch,
    init_params,
    load_params,
    model_forward,
    save_params,
    windows_to_batch,
)
from .pdr import (
    PdrConfig,
    StepEvent,
    calibrate_step_coefficient,
    detect_steps,
    pdr_track,
    step_length,
)
from .dataio import (
    export_dataset,
    load_noise,
    load_profile,
    read_imu_csv,
    read_trajectory_csv,
    read_truth_csv,
    save_noise,
    save_profile,
    write_imu_csv,
    write_trajectory_csv,
    write_truth_csv,
)
from .rotations import log_rotation, rodrigues_increment, wrap_angle, yaw_of
from .simulate import (
    MotionProfile,
    NoiseModel,
    corrupt,
    default_consumer_noise,
    inverse_imu,
    make_dataset,
    synthesize,
    with_seed,
)
from .strapdown import (
    DEFAULT_GRAVITY,
    STANDARD_GRAVITY,
    ImuSample,
    ImuSequence,
    NavState,
    StateTrack,
    integrate_track,
    propagate,
    tilt_drift,
)
from .training import (
    LabeledDataset,
    TrainingConfig,
    concat_datasets,
    make_labeled_dataset,
    predict_deltas,
    predict_track,
    prediction_times,
    train,
)
from .windows import (
    WINDOW_LEN,
    WINDOW_STRIDE,
    BodyInitState,
    PolarDelta,
    Pose2D,
    Window,
    chain,
    heading_change,
    horizontal_distance,
    label_windows,
    segment,
    window_displacement,
)

__version__ = "0.1.0"
