"""vismark: vision-saliency-guided green-list watermarking toolkit.

Embeds detectable statistical watermarks into autoregressive token
generation by partitioning the vocabulary with visual-saliency ranking
and a keyed PRF, boosts the selected logits, detects the signal with a
one-sided proportion test, and numerically verifies the scheme's
theoretical guarantees at desk scale.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .attacks import AttackSpec, attack_edit, ingest_external_text, nearest_synonym
from .detection import (
    DetectionReport,
    auc,
    detect_full_replay,
    detect_model_free,
    z_score,
)
from .embeddings import (
    LinguisticVocab,
    VisionEmbeddings,
    WatermarkConfig,
    cosine,
    filter_linguistic,
    load_decode_table,
    project_vision,
    read_embedding_matrix,
    write_embedding_matrix,
)
from .errors import (
    ConfigError,
    DegenerateVocabularyError,
    DomainError,
    FormatError,
    InsufficientDataError,
    ShapeError,
    TruncatedFileError,
    ValidationError,
    VismarkError,
)
from .harness import (
    SceneSpec,
    ToyLM,
    ToyLMSpec,
    build_world,
    run_experiment,
    synthetic_scene,
    toy_lm,
    verify_theory,
)
from .partition import (
    SENTINEL_PREV_TOKEN,
    UNKNOWN_TOKEN_ID,
    EntropyInfo,
    PartitionState,
    build_partition,
    green_test,
    partition_ratios,
    step_entropy,
)
from .saliency import (
    RankedVocabulary,
    SaliencyScores,
    ccs,
    fuse_and_rank,
    gsc,
    lpa,
    normalize_metric,
)
from .watermark import (
    GenerationRecord,
    LogitsSource,
    StepAudit,
    adjust_distribution,
    generate,
    generate_unwatermarked,
    sample_token,
)
