"""Latent-similarity Gaussian processes for multi-subject event forecasting.

Subpackages are imported lazily where they pull in JAX so that data-only
workflows (CSV ingestion, metrics) stay light.
"""

__version__ = "0.1.0"
