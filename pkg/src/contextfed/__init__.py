"""Desk-scale simulator for federated, context-aware language-based
mental health monitoring: preprocessing, fixed embeddings, per-context
linear heads with FedAvg, leave-one-user-out evaluation, synthetic
cohorts, and a duty-cycled speech collection simulation."""

__version__ = "0.1.0"
