"""Embedding adapter for the news-outlook pipeline.

Converts article text into vectors in the pipeline's exchange format
with a deterministic, locally available model, and holds the prompt
templates used to generate labeled anchor articles offline.
"""

from .core import (
    TOKEN_LIMIT,
    BatchSummary,
    EmbedRequest,
    HashModel,
    ModelError,
    embed_batch,
    embed_texts,
    load_model,
)
from .prompts import POLARITIES, SECTORS, prompt_template, prompt_templates

__version__ = "0.1.0"

__all__ = [
    "TOKEN_LIMIT",
    "BatchSummary",
    "EmbedRequest",
    "HashModel",
    "ModelError",
    "embed_batch",
    "embed_texts",
    "load_model",
    "POLARITIES",
    "SECTORS",
    "prompt_template",
    "prompt_templates",
    "__version__",
]
