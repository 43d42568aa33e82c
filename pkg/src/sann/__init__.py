"""Data-dependent hashing for approximate near neighbor search."""
from .geometry import Ball, GeometryError, Point, SphereFrame, TailBounds
from .index import BuildParams, Forest, QueryStats, build_forest, build_tree, query_forest, query_tree
from .kernels import BACKEND

__all__ = [
    "BACKEND", "Ball", "BuildParams", "Forest", "GeometryError", "Point", "QueryStats",
    "SphereFrame", "TailBounds", "build_forest", "build_tree", "query_forest", "query_tree",
]
__version__ = "0.1.0"
