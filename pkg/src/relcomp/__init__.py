"""Compose relation vectors from word/entity embeddings and benchmark them."""
from .embeddings import (EmbeddingStore, TokenNotFound, cosine, load_embeddings, lookup,
                         normalize, save_embeddings)
from .operators import ALL_OPERATORS, RelationOperator, compose, dimension_correlation

__version__ = "0.1.0"

__all__ = [
    "ALL_OPERATORS", "EmbeddingStore", "RelationOperator", "TokenNotFound", "compose",
    "cosine", "dimension_correlation", "load_embeddings", "lookup", "normalize",
    "save_embeddings",
]
