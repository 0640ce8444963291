"""Plain-text system files: parsing, printing and compilation."""

from .ast import differentiate, to_source
from .compile import LoadedSystem, StandardForm, TransformError, compile_manifest, load_system, to_standard_form
from .parser import ParseError, SystemManifest, parse_expr, parse_system

__all__ = [
    "ParseError", "SystemManifest", "parse_expr", "parse_system", "to_source", "differentiate",
    "LoadedSystem", "StandardForm", "TransformError", "compile_manifest", "load_system",
    "to_standard_form",
]
