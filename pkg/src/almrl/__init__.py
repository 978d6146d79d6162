"""LQ asset-liability management: model-free continuous-time actor-critic,
classical-control oracle, baseline strategies and evaluation pipeline."""

__version__ = "0.1.0"
