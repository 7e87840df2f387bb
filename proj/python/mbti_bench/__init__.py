"""Python bindings for the mbti personality prediction toolkit."""

import os
from pathlib import Path

_stopwords = Path(__file__).parent / "data" / "stopwords"
if _stopwords.is_dir():
    os.environ.setdefault("MBTI_STOPWORDS_DIR", str(_stopwords))

from ._core import (  # noqa: E402
    ConfigError,
    DataError,
    NumericError,
    class_distribution,
    compute_metrics,
    encode_labels,
    mcnemar,
    mcnemar_test,
    preprocess,
    run,
    version,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "class_distribution",
    "compute_metrics",
    "encode_labels",
    "mcnemar",
    "mcnemar_test",
    "preprocess",
    "run",
    "version",
]
