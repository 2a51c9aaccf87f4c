"""Python bindings for the mygo knowledge-graph completion core."""

from ._mygo import (
    ConfigError,
    DataError,
    MygoError,
    NumericError,
    evaluate,
    gradcheck,
    load_checkpoint,
    prepare,
    synth,
    train,
    version,
)

__all__ = [
    "ConfigError",
    "DataError",
    "MygoError",
    "NumericError",
    "evaluate",
    "gradcheck",
    "load_checkpoint",
    "prepare",
    "synth",
    "train",
    "version",
]
__version__ = version()
