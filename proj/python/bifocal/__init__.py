"""Bifocal tensor averaging for collinear camera setups."""

from bifocal._core import (
    BifocalError,
    Measurements,
    Scene,
    certify,
    generate_scene,
    measure,
    project,
    run_pipeline,
)

__all__ = [
    "BifocalError",
    "Measurements",
    "Scene",
    "certify",
    "generate_scene",
    "measure",
    "project",
    "run_pipeline",
]
