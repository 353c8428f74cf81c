"""Hybrid CNN + Random Forest + MLP classifier for multiclass DDoS flow detection."""

__version__ = "0.1.0"

from ddos_hybrid._kernels import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
