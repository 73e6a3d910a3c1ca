"""Body-part-aware non-rigid registration of sparse human LiDAR scans.

The library estimates per-point 3D scene flow between two sparse scans
of a moving person.  Points are labeled by nearest skeletal bone
segment, matched through descriptor-based soft correspondence, and the
flow is polished by alternating gradient descent on a self-supervised
objective with per-part rigid fits.  A simulator (rosette-pattern
scanners raycast against an articulated walking body) provides ground
truth for the bundled evaluation protocol.
"""

from .bodyparts import (
    DEFAULT_BONES,
    DEFAULT_JOINT_NAMES,
    assign_labels,
    make_skeleton,
    transfer_labels,
)
from .core import (
    Descriptor,
    FlowField,
    PartLabels,
    PointCloud,
    RigidTransform,
    Skeleton,
    SoftCorrespondence,
    compose_rigid,
    rigid_to_flow,
    warp,
)
from .correspond import (
    CorrespondenceConfig,
    compute_descriptor,
    flow_from_correspondence,
    handcrafted_descriptor,
    soft_correspondence,
)
from .losses import (
    FrozenAssignments,
    LossWeights,
    SelfSupState,
    chamfer_loss,
    clustering_loss,
    flow_loss,
    freeze_assignments,
    frozen_selfsup_loss,
    grad_selfsup,
    part_rigid_loss,
    seg_loss,
    smoothness_loss,
    soft_from_hard,
    supervised_loss,
    total_selfsup_loss,
)
from .metrics import (
    MetricReport,
    PairRecord,
    SequenceWindow,
    aggregate_metrics,
    build_sequences,
    flow_metrics,
    sample_points,
)
from .register import (
    RegistrationConfig,
    RegistrationResult,
    register_pair,
    register_sequence,
)
from .rigidfit import (
    KabschFit,
    PartFit,
    fit_parts,
    fits_by_part,
    kabsch,
    refine_flow,
)
from .spatial import NeighborIndex

__version__ = "0.1.0"

__all__ = [
    "CorrespondenceConfig",
    "DEFAULT_BONES",
    "DEFAULT_JOINT_NAMES",
    "Descriptor",
    "FlowField",
    "FrozenAssignments",
    "LossWeights",
    "MetricReport",
    "NeighborIndex",
    "PairRecord",
    "PartFit",
    "PartLabels",
    "PointCloud",
    "RegistrationConfig",
    "RegistrationResult",
    "RigidTransform",
    "SelfSupState",
    "SequenceWindow",
    "Skeleton",
    "SoftCorrespondence",
    "aggregate_metrics",
    "assign_labels",
    "build_sequences",
    "chamfer_loss",
    "clustering_loss",
    "compose_rigid",
    "compute_descriptor",
    "fit_parts",
    "fits_by_part",
    "flow_from_correspondence",
    "flow_loss",
    "flow_metrics",
    "freeze_assignments",
    "frozen_selfsup_loss",
    "grad_selfsup",
    "handcrafted_descriptor",
    "KabschFit",
    "kabsch",
    "make_skeleton",
    "part_rigid_loss",
    "refine_flow",
    "register_pair",
    "register_sequence",
    "rigid_to_flow",
    "sample_points",
    "seg_loss",
    "smoothness_loss",
    "soft_from_hard",
    "soft_correspondence",
    "supervised_loss",
    "total_selfsup_loss",
    "transfer_labels",
    "warp",
]
