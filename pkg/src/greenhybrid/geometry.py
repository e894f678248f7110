"""Closed triangulated surfaces: OFF ingestion, sphere generation, validation."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TriangleMesh", "MeshError", "ValidationReport", "load_off", "write_off",
           "generate_sphere", "validate"]


class MeshError(ValueError):
    """Raised for malformed OFF input or invalid surface topology."""


@dataclass(frozen=True)
class TriangleMesh:
    """Closed, consistently oriented surface triangulation.

    vertices : (nv, 3) float array
    triangles : (nt, 3) int array, outward winding
    areas, normals, centroids are derived from the winding order.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    areas: np.ndarray = field(init=False)
    normals: np.ndarray = field(init=False)
    centroids: np.ndarray = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.int64)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle references vertex index out of range")
        p = v[t]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        norm = np.linalg.norm(cross, axis=1)
        if np.any(norm <= 1e-14):
            bad = int(np.argmin(norm))
            raise MeshError(f"degenerate (zero-area) triangle at index {bad}")
        object.__setattr__(self, "areas", 0.5 * norm)
        object.__setattr__(self, "normals", cross / norm[:, None])
        object.__setattr__(self, "centroids", p.mean(axis=1))

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def triangle_points(self):
        """(nt, 3, 3) vertex coordinates per triangle."""
        return self.vertices[self.triangles]

    def vertex_to_triangles(self):
        """List of incident triangle indices per vertex."""
        incidence = [[] for _ in range(self.n_vertices)]
        for ti, tri in enumerate(self.triangles):
            for vi in tri:
                incidence[vi].append(ti)
        return incidence

    def signed_volume(self):
        """Enclosed volume by the divergence theorem (positive if outward)."""
        p = self.triangle_points()
        return float(np.einsum("ij,ij->", p[:, 0], np.cross(p[:, 1], p[:, 2]))) / 6.0


def _edge_map(triangles):
    """Map undirected edge -> list of (triangle, directed-as-stored flag)."""
    edges = {}
    for ti, (a, b, c) in enumerate(triangles):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            edges.setdefault(key, []).append((ti, u < v))
    return edges


@dataclass
class ValidationReport:
    closed: bool
    oriented: bool
    min_area: float
    max_area: float
    outward: bool
    problems: list

    @property
    def ok(self):
        return self.closed and self.oriented and self.outward


def validate(mesh):
    """Check closedness, orientation consistency, areas, and outwardness.

    Outwardness uses the sign of n . (centroid - barycenter), which is the
    right test for star-shaped surfaces (all the bundled geometries are).
    """
    problems = []
    edges = _edge_map(mesh.triangles)
    closed = True
    oriented = True
    for key, uses in edges.items():
        if len(uses) != 2:
            closed = False
            problems.append(f"edge {key} bounds {len(uses)} triangle(s), expected 2")
        elif uses[0][1] == uses[1][1]:
            oriented = False
            problems.append(f"edge {key} traversed twice in the same direction "
                            f"by triangles {uses[0][0]} and {uses[1][0]}")
    barycenter = mesh.vertices.mean(axis=0)
    signs = np.einsum("ij,ij->i", mesh.normals, mesh.centroids - barycenter)
    outward = bool(np.all(signs > 0))
    if not outward:
        problems.append(f"{int(np.sum(signs <= 0))} triangle(s) with inward normal")
    return ValidationReport(
        closed=closed,
        oriented=oriented,
        min_area=float(mesh.areas.min()),
        max_area=float(mesh.areas.max()),
        outward=outward,
        problems=problems,
    )


def load_off(text):
    """Parse an ASCII OFF document with triangular faces into a TriangleMesh.

    Raises MeshError with a line number on malformed input, on non-triangular
    faces, and on open or inconsistently oriented surfaces.
    """
    lines = text.splitlines()
    significant = [(ln + 1, s) for ln, raw in enumerate(lines)
                   if (s := raw.split("#", 1)[0].strip())]
    cursor = iter(significant)

    def next_line(what):
        try:
            return next(cursor)
        except StopIteration:
            raise MeshError(f"unexpected end of file while reading {what}") from None

    ln, header = next_line("header")
    if header != "OFF":
        raise MeshError(f"line {ln}: expected 'OFF' header, got {header!r}")
    ln, counts = next_line("counts")
    parts = counts.split()
    if len(parts) != 3:
        raise MeshError(f"line {ln}: counts line must hold 3 integers")
    try:
        nv, nf, _ne = (int(p) for p in parts)
    except ValueError:
        raise MeshError(f"line {ln}: counts line must hold 3 integers") from None

    vertices = np.empty((nv, 3))
    for i in range(nv):
        ln, s = next_line(f"vertex {i}")
        parts = s.split()
        if len(parts) != 3:
            raise MeshError(f"line {ln}: vertex line must hold 3 coordinates")
        try:
            vertices[i] = [float(p) for p in parts]
        except ValueError:
            raise MeshError(f"line {ln}: bad vertex coordinate") from None

    triangles = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        ln, s = next_line(f"face {i}")
        parts = s.split()
        try:
            count = int(parts[0])
        except (ValueError, IndexError):
            raise MeshError(f"line {ln}: bad face line") from None
        if count != 3:
            raise MeshError(f"line {ln}: non-triangular face ({count} vertices)")
        if len(parts) != 4:
            raise MeshError(f"line {ln}: face line must hold 3 vertex indices")
        try:
            triangles[i] = [int(p) for p in parts[1:4]]
        except ValueError:
            raise MeshError(f"line {ln}: bad vertex index") from None

    mesh = TriangleMesh(vertices, triangles)
    report = validate(mesh)
    if not report.closed:
        raise MeshError("open surface: " + "; ".join(report.problems[:3]))
    if not report.oriented:
        raise MeshError("inconsistent orientation: " + "; ".join(report.problems[:3]))
    return mesh


def write_off(mesh):
    """Serialize to ASCII OFF, deterministically."""
    out = ["OFF", f"{mesh.n_vertices} {mesh.n_triangles} 0"]
    out += [" ".join(f"{c:.17g}" for c in v) for v in mesh.vertices]
    out += ["3 " + " ".join(str(i) for i in tri) for tri in mesh.triangles]
    return "\n".join(out) + "\n"


_OCTAHEDRON_VERTICES = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float
)
_OCTAHEDRON_FACES = np.array(
    [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
     [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]], dtype=np.int64
)


def generate_sphere(level):
    """Unit sphere from 4-way refinement of the octahedron; 8 * 4^level triangles.

    All vertices are projected onto the unit sphere at every refinement step.
    """
    if not 0 <= level <= 8:
        raise ValueError(f"generate_sphere: level must be in [0, 8], got {level}")
    vertices = [v for v in _OCTAHEDRON_VERTICES]
    faces = _OCTAHEDRON_FACES
    for _ in range(level):
        midpoint = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint:
                p = vertices[i] + vertices[j]
                vertices.append(p / np.linalg.norm(p))
                midpoint[key] = len(vertices) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
        faces = np.array(new_faces, dtype=np.int64)
    return TriangleMesh(np.array(vertices), faces)
