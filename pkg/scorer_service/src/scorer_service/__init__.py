"""HTTP sidecar for claim/document pair scoring.

Serves two batch endpoints consumed by the retrieval pipeline: /v1/relevance
(cross-encoder style logits) and /v1/verify (SUPPORT/REFUTE/NEI label
probabilities), plus offline scripts that fine-tune the small built-in models
on the pipeline's training files.  No fidelity to any large pretrained model
is claimed; identifiers are configurable so bigger models can be slotted in.
"""

__version__ = "0.1.0"
