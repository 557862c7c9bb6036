"""fsg — face swapping / reenactment pipeline toolkit.

The non-neural machinery of a subject-agnostic face swapping pipeline:
pose-space appearance maps with Delaunay/barycentric face-view interpolation,
stepwise landmark-driven reenactment planning, gradient-domain blending, mask
operations, training-loss formulas, dataset curation, and the evaluation
protocol.  Neural generators stay behind a pluggable image+heatmap ->
image+mask contract, served by built-in mocks or external processes over a
framed wire protocol.
"""

from .core import (
    BACKGROUND,
    FACE,
    HAIR,
    EulerPose,
    Image,
    Landmark3DSet,
    LandmarkSet,
    PlanePoint,
    SegMask,
    angular_distance,
    pose_to_plane,
    rotation_matrix,
)
from .errors import (
    ConvergenceError,
    NoViewError,
    OutOfRangeError,
    PipelineError,
    ProtocolError,
    ToolkitError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "BACKGROUND",
    "FACE",
    "HAIR",
    "EulerPose",
    "Image",
    "Landmark3DSet",
    "LandmarkSet",
    "PlanePoint",
    "SegMask",
    "angular_distance",
    "pose_to_plane",
    "rotation_matrix",
    "ToolkitError",
    "ValidationError",
    "OutOfRangeError",
    "NoViewError",
    "ConvergenceError",
    "ProtocolError",
    "PipelineError",
    "__version__",
]
