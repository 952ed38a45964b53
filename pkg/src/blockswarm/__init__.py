"""Surrogate-assisted particle swarm search for variable-length dense blocks."""
from .encoding import BlockSpec, EncodingConfig, decode, encode
from .search import SearchConfig, run_search, stack_and_select

__all__ = ["BlockSpec", "EncodingConfig", "SearchConfig", "decode", "encode", "run_search",
           "stack_and_select"]
