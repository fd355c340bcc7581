"""Harvest OAI-PMH meta-catalogs, probe their endpoints and measure overlap."""

from .model import (
    CatalogId,
    CatalogSnapshot,
    ConfigError,
    MembershipMap,
    NormalizedUrl,
    Outcome,
    OverlapReport,
    ProbeRecord,
    RawRepositoryEntry,
    mask_of,
)
from .normalize import dedupe, simple_normalize, strong_normalize
from .overlap import (
    all_common,
    analyze,
    build_membership,
    exclude_catalog,
    pairwise_matrix,
    ratio_matrix,
    specificity,
    venn_regions,
)
from .prober import ProbeConfig, build_identify_url, classify_response, probe_all, summarize_outcomes

__version__ = "0.1.0"
