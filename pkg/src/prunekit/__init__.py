"""Text- and uncertainty-guided token pruning for memory-based video
segmentation, with a desk-scale propagation simulator and benchmark
harness."""

__version__ = "0.1.0"

from .encoder import EncoderConfig, TokenGrid, encode, encode_stochastic
from .errors import DataError, NumericError, PrunekitError, UsageError
from .linalg import ridge_lsq, softmax, top_k
from .memsim import (
    ClickPrompt,
    CostLedger,
    MaskPrediction,
    MemoryBank,
    PipelineConfig,
    PromptEmbedding,
    RefineConfig,
    decode,
    encode_prompt,
    memory_write,
    propagate,
    representative_click,
    simulate_refinement,
)
from .metrics import boundary_f, jaccard, jf_score
from .router import (
    PruneConfig,
    RouterTrainConfig,
    RouterWeights,
    fuse,
    heuristic_score,
    init_router_weights,
    prune,
    score,
    train_router,
)
from .scenes import SceneConfig, VideoSequence, easy_suite, generate_scene
from .semantic import EmbedConfig, TextEmbedding, align_text, embed_text, fit_text_projection
from .uncertainty import UncertaintyMap, mc_uncertainty, uncertainty_from_taps

__all__ = [
    "ClickPrompt",
    "CostLedger",
    "DataError",
    "EmbedConfig",
    "EncoderConfig",
    "MaskPrediction",
    "MemoryBank",
    "NumericError",
    "PipelineConfig",
    "PromptEmbedding",
    "PruneConfig",
    "PrunekitError",
    "RefineConfig",
    "RouterTrainConfig",
    "RouterWeights",
    "SceneConfig",
    "TextEmbedding",
    "TokenGrid",
    "UncertaintyMap",
    "UsageError",
    "VideoSequence",
    "align_text",
    "boundary_f",
    "decode",
    "easy_suite",
    "embed_text",
    "encode",
    "encode_prompt",
    "encode_stochastic",
    "fit_text_projection",
    "fuse",
    "generate_scene",
    "heuristic_score",
    "init_router_weights",
    "jaccard",
    "jf_score",
    "mc_uncertainty",
    "memory_write",
    "propagate",
    "prune",
    "representative_click",
    "ridge_lsq",
    "score",
    "simulate_refinement",
    "softmax",
    "top_k",
    "train_router",
    "uncertainty_from_taps",
]
