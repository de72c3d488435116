"""Simplicial meshes of the parameter manifold (circle and sphere).

Vertices are stored chart-free as unit vectors; simplices are index
tuples (segments for n=1, triangles for n=2). A minimal ASCII format is
provided for export: vertex count, vertex coordinates, simplex count,
index tuples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

__all__ = [
    "ParamMesh",
    "build_circle_mesh",
    "build_icosphere_mesh",
    "circle_segments_for_level",
    "euler_characteristic",
    "facet_incidence",
    "save_mesh",
    "load_mesh",
]


@dataclass
class ParamMesh:
    vertices: np.ndarray
    simplices: np.ndarray
    kind: str
    level: int | None = None

    @property
    def n(self) -> int:
        return self.simplices.shape[1] - 1

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_simplices(self) -> int:
        return self.simplices.shape[0]


def circle_segments_for_level(level: int) -> int:
    return 16 * 2**level


def build_circle_mesh(segments: int, level: int | None = None) -> ParamMesh:
    """Uniform cyclic polyline on the unit circle."""
    if segments < 3:
        raise UsageError("need at least 3 segments")
    theta = 2.0 * math.pi * np.arange(segments) / segments
    vertices = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    idx = np.arange(segments)
    simplices = np.stack([idx, (idx + 1) % segments], axis=1)
    return ParamMesh(vertices, simplices, kind="circle", level=level)


_ICO_COORDS = None
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)


def _icosahedron_vertices() -> np.ndarray:
    global _ICO_COORDS
    if _ICO_COORDS is None:
        r = (1.0 + math.sqrt(5.0)) / 2.0
        coords = np.array(
            [
                [-1.0, r, 0.0], [1.0, r, 0.0], [-1.0, -r, 0.0], [1.0, -r, 0.0],
                [0.0, -1.0, r], [0.0, 1.0, r], [0.0, -1.0, -r], [0.0, 1.0, -r],
                [r, 0.0, -1.0], [r, 0.0, 1.0], [-r, 0.0, -1.0], [-r, 0.0, 1.0],
            ]
        )
        _ICO_COORDS = coords / np.linalg.norm(coords, axis=1, keepdims=True)
    return _ICO_COORDS


def build_icosphere_mesh(level: int) -> ParamMesh:
    """Icosahedron subdivided `level` times, vertices projected to the sphere.

    Vertex count is 10 * 4^level + 2; subdivision order is deterministic.
    """
    if level < 0:
        raise UsageError("level must be nonnegative")
    vertices = [v for v in _icosahedron_vertices()]
    faces = _ICO_FACES.copy()
    for _ in range(level):
        midpoints: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            idx = midpoints.get(key)
            if idx is None:
                mid = vertices[i] + vertices[j]
                vertices.append(mid / np.linalg.norm(mid))
                idx = len(vertices) - 1
                midpoints[key] = idx
            return idx

        new_faces = []
        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
        faces = np.array(new_faces)
    return ParamMesh(np.array(vertices), faces, kind="sphere", level=level)


def facet_incidence(mesh: ParamMesh) -> dict:
    """Map facet (sorted vertex tuple) -> incidence count."""
    counts: dict[tuple, int] = {}
    n = mesh.n
    for simplex in mesh.simplices:
        for drop in range(n + 1):
            facet = tuple(sorted(v for k, v in enumerate(simplex) if k != drop))
            counts[facet] = counts.get(facet, 0) + 1
    return counts


def euler_characteristic(mesh: ParamMesh) -> int:
    if mesh.n == 1:
        return mesh.num_vertices - mesh.num_simplices
    edges = {
        tuple(sorted(e))
        for simplex in mesh.simplices
        for e in ((simplex[0], simplex[1]), (simplex[1], simplex[2]), (simplex[2], simplex[0]))
    }
    return mesh.num_vertices - len(edges) + mesh.num_simplices


def save_mesh(mesh: ParamMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{mesh.num_vertices}\n")
        for v in mesh.vertices:
            fh.write(" ".join(repr(float(x)) for x in v) + "\n")
        fh.write(f"{mesh.num_simplices}\n")
        for s in mesh.simplices:
            fh.write(" ".join(str(int(i)) for i in s) + "\n")


def load_mesh(path) -> ParamMesh:
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split("\n")
    pos = 0
    nv = int(tokens[pos]); pos += 1
    vertices = np.array(
        [[float(x) for x in tokens[pos + i].split()] for i in range(nv)]
    )
    pos += nv
    ne = int(tokens[pos]); pos += 1
    simplices = np.array(
        [[int(x) for x in tokens[pos + i].split()] for i in range(ne)]
    )
    kind = "circle" if simplices.shape[1] == 2 else "sphere"
    return ParamMesh(vertices, simplices, kind=kind, level=None)
