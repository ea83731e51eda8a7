"""mixbound: certified bounds on KL divergence, cross-entropy and entropy of univariate mixtures."""
__version__ = "1.0.0"
