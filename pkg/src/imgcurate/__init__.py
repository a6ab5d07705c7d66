"""imgcurate: image dataset curation.

Quality scoring and filtering, multi-modal vector retrieval with diversity
re-ranking and relevance feedback, feature-level deduplication, structured
taxonomy captions, and stage-wise sampling plans.
"""

__version__ = "0.1.0"

from .embeddings import EmbeddingGateway, EmbeddingVector, StubEmbeddingProvider, cosine
from .imgio import ImageFormat, ImageMeta, PixelBuffer, decode_metadata, decode_pixels
from .index import QueryMode, ResultSet, RetrievalQuery, VectorIndex, aggregate_multi, compose_hybrid
from .metrics import QualityReport, bpp_complexity, compression_ratio, edge_pixel_variance, score_image
from .records import ImageRecord, Manifest, ManifestEntry
from .sampling import SamplingPlan, build_sampling_plan, sample_manifest
from .taxonomy import (
    CaptionPatch,
    PrimaryCategory,
    StructuredCaption,
    attribute_schema,
    merge_caption_update,
    route_category,
    validate_caption,
)
from .thresholds import ThresholdProfile, build_threshold_profile

__all__ = [
    "EmbeddingGateway",
    "EmbeddingVector",
    "StubEmbeddingProvider",
    "cosine",
    "ImageFormat",
    "ImageMeta",
    "PixelBuffer",
    "decode_metadata",
    "decode_pixels",
    "QueryMode",
    "ResultSet",
    "RetrievalQuery",
    "VectorIndex",
    "aggregate_multi",
    "compose_hybrid",
    "QualityReport",
    "bpp_complexity",
    "compression_ratio",
    "edge_pixel_variance",
    "score_image",
    "ImageRecord",
    "Manifest",
    "ManifestEntry",
    "SamplingPlan",
    "build_sampling_plan",
    "sample_manifest",
    "CaptionPatch",
    "PrimaryCategory",
    "StructuredCaption",
    "attribute_schema",
    "merge_caption_update",
    "route_category",
    "validate_caption",
    "ThresholdProfile",
    "build_threshold_profile",
]
