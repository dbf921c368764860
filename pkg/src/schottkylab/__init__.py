"""Schottky sets, equivariant extensions and round-domain Denjoy scenes."""

__version__ = "0.1.0"

from .moebius import (  # noqa: E402
    INFINITY,
    Ball,
    GeometryError,
    LinearMap,
    MoebiusMap,
    Plane,
    Sphere,
    chordal_distance,
    image_of_ball,
    image_of_sphere,
    invert,
    linear_dilatation,
)
from .schottky import (  # noqa: E402
    SchottkyError,
    SchottkySet,
    double,
    enumerate_words,
    orbit_packing,
    unfold,
    validate,
    word_count,
)

__all__ = [
    "INFINITY", "Ball", "GeometryError", "LinearMap", "MoebiusMap", "Plane", "Sphere",
    "chordal_distance", "image_of_ball", "image_of_sphere", "invert", "linear_dilatation",
    "SchottkyError", "SchottkySet", "double", "enumerate_words", "orbit_packing", "unfold",
    "validate", "word_count",
]
