"""Single-image contour completion with an untrained convolutional generator."""

from .autodiff import Tensor, channel_norm, concat_channels, conv2d, upsample_nearest2x
from .energy import EnergyConfig, dip_energy, dsp_energy, dsp_self_mask_baseline
from .engine import (
    DivergenceError,
    RunConfig,
    ScoreTrace,
    complete,
    complete_oracle_best,
    estimate_gamma,
    gamma_from_truth,
)
from .errors import ConfigError, ShapeError
from .generator import (
    GeneratorConfig,
    GeneratorParams,
    forward,
    init_generator,
    make_noise,
    receptive_field,
)
from .kdtree import KDTree
from .optim import Adam, AdamState, adam_step
from .scores import (
    GapStat,
    PointSet,
    ScoreConfig,
    binarize,
    dissimilarity,
    extract_points,
    gap_metric,
    overfit_score,
    reconstruction_score,
)
from .shapes import (
    CATEGORIES,
    DatasetSample,
    DegradationSpec,
    ShapeSpec,
    cut_gaps,
    generate_dataset,
    load_dataset,
    render_shape,
    save_dataset,
)

__all__ = [
    "Adam",
    "AdamState",
    "CATEGORIES",
    "ConfigError",
    "DatasetSample",
    "DegradationSpec",
    "DivergenceError",
    "EnergyConfig",
    "GapStat",
    "GeneratorConfig",
    "GeneratorParams",
    "KDTree",
    "PointSet",
    "RunConfig",
    "ScoreConfig",
    "ScoreTrace",
    "ShapeError",
    "ShapeSpec",
    "Tensor",
    "adam_step",
    "binarize",
    "channel_norm",
    "complete",
    "complete_oracle_best",
    "concat_channels",
    "conv2d",
    "cut_gaps",
    "dip_energy",
    "dissimilarity",
    "dsp_energy",
    "dsp_self_mask_baseline",
    "estimate_gamma",
    "extract_points",
    "forward",
    "gamma_from_truth",
    "gap_metric",
    "generate_dataset",
    "init_generator",
    "load_dataset",
    "make_noise",
    "overfit_score",
    "receptive_field",
    "reconstruction_score",
    "render_shape",
    "save_dataset",
    "upsample_nearest2x",
]

__version__ = "0.1.0"
