"""detinfuse: compact textual scene descriptions for multimodal prompts.

Converts object-detection and OCR outputs into short instruction-prefixed
sentences, injects them into chat-style inference requests, and scores the
results against VQA-style benchmarks.
"""

from .geometry import (
    Detection,
    NormBox,
    OcrSpan,
    Thresholds,
    center_of,
    filter_by_confidence,
    to_norm_box,
)
from .ingest import (
    DetectionFile,
    OcrFile,
    OpensetFile,
    OpensetMatch,
    parse_detection_file,
    parse_ocr_file,
    parse_openset_file,
)
from .openset import OpensetQuery, TargetList, build_openset_prompt, extract_targets, openset_to_detections
from .runner import (
    ChatEndpoint,
    EndpointConfig,
    MockEndpoint,
    PromptBundle,
    RunRecord,
    RunStore,
    assemble_prompt,
    config_fingerprint,
    mock_answer,
    run_batch,
)
from .scoring import (
    BenchSample,
    ScoreReport,
    ValseCounters,
    ValseInstance,
    ValseScores,
    build_valse_questions,
    delta,
    gqa_star_filter,
    normalize_answer,
    score_exact,
    tally_valse,
    valse_score,
)
from .textgen import (
    DEFAULT_BUDGET,
    InfusionText,
    LengthStats,
    TokenizerSpec,
    apply_budget,
    build_od_sentence,
    build_ocr_sentence,
    corpus_stats,
    format_coord,
    pluralize,
    token_len,
)

__version__ = "0.1.0"
