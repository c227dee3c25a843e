"""keymotion: five-keypoint humanoid motion pipeline.

Sparse keypoint action encoding/decoding, spatial keypoint retargeting onto
a robot model, reference resampling and observation assembly, and residual
PD tracking against a simulated plant. Hot kinematics kernels run in a
compiled extension when available, with a pure-numpy fallback (see
``keymotion._backend``).
"""

from ._backend import HAS_COMPILED_KERNELS, get_kernels
from .action_codec import (
    ACTION_DIM,
    DEFAULT_HORIZON,
    ActionChunk,
    KeypointFrame,
    NormalizationStats,
    RelativeChunk,
    absolute_from_chunk,
    compute_stats,
    decode,
    encode,
    relative_chunk,
)
from .controller import (
    ControllerConfig,
    EpisodeLog,
    PlantState,
    decode_action,
    encode_reference,
    pd_torque,
    plant_step,
    run_episode,
)
from .geometry import (
    Pose,
    pose_compose,
    pose_inverse,
    projected_gravity,
    quat_canonical,
    quat_mul,
    quat_to_matrix,
    rot6d_decode,
    rot6d_encode,
    slerp,
)
from .kinematics import (
    KEYPOINT_NAMES,
    FkResult,
    KinematicModel,
    ModelError,
    forward_kinematics,
    keypoint_jacobian,
    load_builtin,
    load_model,
)
from .motion_ref import (
    DEFAULT_OFFSETS,
    MotionChunk,
    OffsetSet,
    ProprioHistory,
    ReferenceBuffer,
    RobotState,
    assemble_command,
    assemble_proprio,
    command_frame,
    high_level_proprio,
    resample,
)
from .skr import (
    IkReport,
    IkSettings,
    RobotMotionFrame,
    SkrConfig,
    StreamRetargeter,
    TaskWeight,
    retarget,
    retarget_stream,
    scale_keypoints,
)

__version__ = "0.1.0"
