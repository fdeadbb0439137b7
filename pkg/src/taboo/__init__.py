"""Sensitive-information detection toolkit.

Keyword-count baselines, a recursive neural network over constituency
parse trees, cluster-based selective training, dataset curation helpers,
evaluation metrics, model persistence, a CLI, and an HTTP inference
service.
"""

__version__ = "0.1.0"
