"""Synthetic canine image datasets with paired segmentation and joint
annotations, plus a binary-segmentation evaluation toolkit."""

from .boxes import PixelBox, mask_bbox
from .compositing import apply_g, composite
from .dataset import (
    AssetPaths,
    Assets,
    DataSample,
    GenerationConfig,
    GenerationError,
    generate_dataset,
    generate_sample,
)
from .metrics import (
    MetricReport,
    dice,
    evaluate_dirs,
    fbeta,
    iou,
    iterative_threshold,
    pixel_accuracy,
)
from .pca import (
    PcaModel,
    PcaSpace,
    SampleMatrix,
    fit_pca,
    load_pca,
    project,
    sample_coefficients,
    save_pca,
    synthesize,
)
from .placement import (
    BBoxStats,
    DepthBounds,
    clamp_translation,
    derive_bbox_stats,
    sample_center,
    sample_root_depth,
)
from .procedural import (
    DogConfig,
    DogProportions,
    generate_canonical_dog,
    synthesize_shape_pca,
)
from .rendering import Camera, Lighting, LightingRanges, RenderOutput, render, sample_lighting, texel_lookup
from .rigging import (
    PoseParams,
    RiggedMesh,
    Skeleton,
    SkinningWeights,
    apply_lbs,
    forward_kinematics,
    part_labels,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
