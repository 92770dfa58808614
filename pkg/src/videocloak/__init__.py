"""videocloak: scene-coherent adversarial cloaking for video frames,
plus the perturbation-removal attacks that motivate it."""

from .attack import (
    AveragingConfig,
    SceneSplitAttackConfig,
    linear_interpolate,
    pixel_average,
    remove_perturbations,
    scene_split_attack,
    select_epsilon_p,
)
from .encoder import (
    Embedding,
    ExternalEncoder,
    FeatureExtractor,
    IdentityEncoder,
    SurrogateEncoder,
    SurrogateEncoderConfig,
    distance,
    external_encoder,
    normalized_distance,
    surrogate_encode,
)
from .errors import (
    DegenerateError,
    FormatError,
    GapError,
    IoError,
    MismatchError,
    NumericalError,
    ProtocolError,
    ShapeError,
    ValidationError,
    VideocloakError,
)
from .frameio import (
    FrameSequence,
    PerturbationTensor,
    SceneManifest,
    SceneSpan,
    load_frame,
    load_sequence,
    read_delta,
    read_manifest,
    save_frame,
    save_sequence,
    write_delta,
    write_manifest,
)
from .metrics import EvalReport, build_report, genre_shift, latent_l2, mpd, speedup_report
from .protect import (
    PGDConfig,
    ProtectionTrace,
    RoutingConfig,
    pgd_optimize,
    protect_scene,
    protect_video,
    protect_video_naive,
    route_distance,
)
from .scenes import ScenePartitionConfig, mean_pixel_diff, partition
from .target import TargetSpec, base_image, checkerboard_style, make_target

__version__ = "0.1.0"
