"""Expression-tag retrieval, masked image editing and diff analysis."""

from ._exprforge import (
    ExprforgeError,
    ExpressionDatabase,
    RetrievalIndex,
    ScoredTag,
    apply_region_transform,
    assemble_prompt,
    compare_means,
    diff_stats,
    extract_canny,
    format_percent,
    gray_level,
    l1_map,
    load_database,
    parse_database,
    read_png,
    render_diff,
    run_edit,
    sample_mean,
    sample_std,
    tokenize,
    write_png,
)

__all__ = [
    "ExprforgeError",
    "ExpressionDatabase",
    "RetrievalIndex",
    "ScoredTag",
    "apply_region_transform",
    "assemble_prompt",
    "compare_means",
    "diff_stats",
    "extract_canny",
    "format_percent",
    "gray_level",
    "l1_map",
    "load_database",
    "parse_database",
    "read_png",
    "render_diff",
    "run_edit",
    "sample_mean",
    "sample_std",
    "tokenize",
    "write_png",
]
