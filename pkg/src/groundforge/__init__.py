"""Synthetic image-text-box data pipeline and grounding evaluation toolkit.

Numerical kernels (mask-consistency losses, gradient-weighted heatmaps,
pointing-game evaluation, box selection) are pure numpy; the synthesis
pipeline talks to its five model roles through a wire protocol with
deterministic seeded mocks standing in for the real models.
"""

from .boxes import (
    Detection,
    TextBoxPool,
    iou,
    select_by_dissimilarity,
    select_max_compatible,
    select_random,
    select_top1_box,
)
from .core import (
    Box,
    BoxMask,
    DatasetManifest,
    DegenerateMaskError,
    GroundingPhrase,
    GroundingRecord,
    Heatmap,
    ImageRef,
    ValidationError,
    rasterize_box,
)
from .evaluation import EvalReport, EvalSample, pointing_accuracy, pointing_hit
from .explanations import ActivationStack, gradcam, normalize_minmax, upsample_bilinear
from .losses import (
    AmcConfig,
    BatchLoss,
    ItcLoss,
    LossWithGrad,
    batch_amc,
    itc_loss,
    itm_loss,
    l_amc,
    l_max,
    l_mean,
)
from .pipeline import (
    ConfigError,
    PipelineConfig,
    RunResult,
    run_caption_pipeline,
    run_layout_selection,
    subsample,
)
from .protocol import (
    BackendEndpoint,
    BackendError,
    BackendExhausted,
    HttpBackend,
    ProtocolError,
)
from .text_analysis import histogram, image_similarity, overlap_coefficient, ttr
from .text_synthesis import (
    ConceptList,
    EXCLUDED_NOUNS,
    InContextExample,
    build_concept_list,
    build_prompt,
    sample_concepts,
    segment_phrases,
    summarize_captions,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
