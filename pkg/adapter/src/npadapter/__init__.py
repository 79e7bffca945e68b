"""NumPy-backed external adapter for the graph fuzzing harness."""

from .irtext import ParseError, UnsupportedConstruct, parse_module, scan_interface
from .runtime import NP_DTYPES, SUPPORTED_DTYPES, SUPPORTED_OPS, run_main
from .serve import FLOAT_RTOL, capability, decode_value, encode_value, serve

__all__ = [
    "FLOAT_RTOL",
    "NP_DTYPES",
    "ParseError",
    "SUPPORTED_DTYPES",
    "SUPPORTED_OPS",
    "UnsupportedConstruct",
    "capability",
    "decode_value",
    "encode_value",
    "parse_module",
    "run_main",
    "scan_interface",
    "serve",
]

__version__ = "0.1.0"
