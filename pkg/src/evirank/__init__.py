"""Evidence retrieval for scientific fact checking.

Two-stage pipeline: BM25 first-stage retrieval, then candidate reordering by
a fusion of semantic relevance and verification feedback, with supervision
construction, a trainable reference reranker, and retrieval/verification
evaluation built around shared file formats.
"""

__version__ = "0.1.0"
