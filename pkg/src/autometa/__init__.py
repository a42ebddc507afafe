"""Zero-shot LLM extraction of trial results and fixed-effect meta-analysis."""

from autometa.corpus import ICORecord, TrialDocument, chunk_document, load_annotations, load_documents
from autometa.evaluation import EvaluationReport, evaluate
from autometa.exceptions import (
    ConfigError,
    ContractViolation,
    DomainError,
    EmptyAnalysisError,
    TransportError,
)
from autometa.extraction import ChatClient, ExtractionTrace, ModelConfig, OutcomeExtractor, ReplayClient
from autometa.findings import BinaryFinding, ContinuousFinding, OutcomeType
from autometa.report import build_forest_model, render_forest_svg, render_tables
from autometa.stats import (
    EffectEstimate,
    EffectSizeTransformer,
    FixedEffectMetaAnalysis,
    PooledEstimate,
    fixed_effect_pool,
    log_odds_ratio,
    sd_from_ci,
    standardized_mean_difference,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryFinding",
    "ChatClient",
    "ConfigError",
    "ContinuousFinding",
    "ContractViolation",
    "DomainError",
    "EffectEstimate",
    "EffectSizeTransformer",
    "EmptyAnalysisError",
    "EvaluationReport",
    "ExtractionTrace",
    "FixedEffectMetaAnalysis",
    "ICORecord",
    "ModelConfig",
    "OutcomeExtractor",
    "OutcomeType",
    "PooledEstimate",
    "ReplayClient",
    "TransportError",
    "TrialDocument",
    "build_forest_model",
    "chunk_document",
    "evaluate",
    "fixed_effect_pool",
    "load_annotations",
    "load_documents",
    "log_odds_ratio",
    "render_forest_svg",
    "render_tables",
    "sd_from_ci",
    "standardized_mean_difference",
]
