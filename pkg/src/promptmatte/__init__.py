"""Promptable interactive image matting at desk scale.

Subpackages cover the full loop: synthetic data generation, the
segmentation-to-matte label converter, the promptable matting network,
evaluation metrics, a CLI harness, and an HTTP inference service.
"""

__version__ = "0.1.0"
