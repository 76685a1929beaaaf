"""fusebench: multimodal late-fusion benchmarking and source attribution.

Builds fusion embeddings from per-source vectors, trains gradient-boosted
tree models over every source subset, scores them with patient-grouped
AUROC, and attributes performance to sources and modalities with exact
Shapley values.
"""

__version__ = "0.1.0"
