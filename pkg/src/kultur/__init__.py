"""Toolkit for building culturally grounded visual question answering
datasets from a multilingual knowledge graph dump.

The usual flow: parse a dump (:mod:`kultur.kg`), keep entities anchored to
cultural regions (:mod:`kultur.select`), attach images (:mod:`kultur.images`),
instantiate question templates (:mod:`kultur.qa`), rewrite and vet the results
through a model gateway (:mod:`kultur.prompts`, :mod:`kultur.parsing`,
:mod:`kultur.gateway`), balance the survivors (:mod:`kultur.sampling`) and
score model predictions (:mod:`kultur.evalharness`). :mod:`kultur.pipeline`
chains the stages over files; ``kultur`` on the command line drives it.
"""

from .config import PipelineConfig, load_config
from .evalharness import GoldItem, Prediction, ScoreReport, match_at, score_predictions
from .gateway import Gateway, GatewayPolicy, ReplayStore, request_hash
from .prompts import PromptRequest, render_prompt
from .images import ImageManifest, ImageRef, build_image_manifest
from .kg import ClaimValue, Entity, ParseDiagnostic, parse_dump_stream
from .parsing import (
    FilterVerdict,
    MalformedResponse,
    McqItem,
    RefinedQa,
    TfItem,
    parse_filter_verdict,
    parse_mcq_response,
    parse_refine_response,
    parse_tf_response,
)
from .qa import QaTemplate, TemplateStore, TemplatedQa
from .records import DatasetRecord, read_records, shuffle_mcq_options, write_records
from .sampling import allocate_quotas, hybrid_sample, temperature_weights
from .select import RegionSpec, SelectedEntity, SelectionConfig, select_cultural_entities
from .stats import StatsReport, compute_stats

__version__ = "0.1.0"

__all__ = [
    "ClaimValue",
    "DatasetRecord",
    "Entity",
    "FilterVerdict",
    "Gateway",
    "GatewayPolicy",
    "GoldItem",
    "ImageManifest",
    "ImageRef",
    "MalformedResponse",
    "McqItem",
    "ParseDiagnostic",
    "PipelineConfig",
    "Prediction",
    "PromptRequest",
    "QaTemplate",
    "RefinedQa",
    "RegionSpec",
    "ReplayStore",
    "ScoreReport",
    "SelectedEntity",
    "SelectionConfig",
    "StatsReport",
    "TemplateStore",
    "TemplatedQa",
    "TfItem",
    "allocate_quotas",
    "build_image_manifest",
    "compute_stats",
    "hybrid_sample",
    "load_config",
    "match_at",
    "parse_dump_stream",
    "parse_filter_verdict",
    "parse_mcq_response",
    "parse_refine_response",
    "parse_tf_response",
    "read_records",
    "render_prompt",
    "request_hash",
    "score_predictions",
    "select_cultural_entities",
    "shuffle_mcq_options",
    "temperature_weights",
    "write_records",
    "__version__",
]
