# SPDX-License-Identifier: Apache-2.0
"""Sparse transfer learning for relevance-feedback reranking."""

from ._core import *  # noqa: F401,F403
from ._core import StlrError  # noqa: F401

__version__ = "0.1.0"
