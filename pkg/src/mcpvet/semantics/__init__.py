"""Lightweight code property graph, dependency slicing, and summaries."""

from .graph import FunctionGraph, FunctionInfo, Statement, build_graph, UNKNOWN
from .slicer import (
    ApiListLoadError,
    CodeSlice,
    FunctionNotFound,
    SensitiveApiSet,
    SliceCriterion,
    render_slice,
    slice_function,
    slice_param_forward,
    slice_return_backward,
    slice_sensitive_api,
)
from .summary import SemanticSummary, extract_semantics, summary_to_dict

__all__ = [
    "FunctionGraph",
    "FunctionInfo",
    "Statement",
    "build_graph",
    "UNKNOWN",
    "ApiListLoadError",
    "CodeSlice",
    "FunctionNotFound",
    "SensitiveApiSet",
    "SliceCriterion",
    "render_slice",
    "slice_function",
    "slice_param_forward",
    "slice_return_backward",
    "slice_sensitive_api",
    "SemanticSummary",
    "extract_semantics",
    "summary_to_dict",
]
