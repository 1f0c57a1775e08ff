"""Closed oriented triangle meshes: connectivity, topology, area weights, file I/O.

Meshes may be embedded in R^3 or in R^4 (surfaces inside the unit 3-sphere).
All connectivity is array based: a face table plus a derived edge table with
face adjacency. Construction validates that the mesh is a single closed
oriented manifold; everything downstream relies on that.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Raised for non-manifold, inconsistently oriented or otherwise invalid meshes."""


@dataclass(frozen=True)
class SurfaceMesh:
    """Closed oriented triangulated surface immersed in R^3 or R^4.

    vertices:     (V, 3) or (V, 4) float positions
    faces:        (F, 3) int vertex triples, consistently oriented
    edges:        (E, 2) int vertex pairs with edges[:, 0] < edges[:, 1]
    edge_faces:   (E, 2) int indices of the two faces incident to each edge
    face_edges:   (F, 3) int edge index opposite each face corner order
    face_areas:   (F,) float
    vertex_areas: (V,) float barycentric lumped weights (1/3 of incident faces)
    genus:        int, from the Euler formula
    """

    vertices: np.ndarray
    faces: np.ndarray
    edges: np.ndarray
    edge_faces: np.ndarray
    face_edges: np.ndarray
    face_areas: np.ndarray
    vertex_areas: np.ndarray
    genus: int
    _edge_index: dict = field(repr=False, default_factory=dict)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    def edge_id(self, a: int, b: int) -> int:
        """Edge index for the unordered vertex pair (a, b)."""
        key = (a, b) if a < b else (b, a)
        return self._edge_index[key]


def _face_gram_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Face areas from the Gram determinant (valid in any ambient dimension)."""
    p0 = vertices[faces[:, 0]]
    u = vertices[faces[:, 1]] - p0
    v = vertices[faces[:, 2]] - p0
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    uv = np.einsum("ij,ij->i", u, v)
    gram = uu * vv - uv * uv
    return 0.5 * np.sqrt(np.maximum(gram, 0.0))


def build_connectivity(vertices: np.ndarray, faces: np.ndarray) -> SurfaceMesh:
    """Build a validated SurfaceMesh from a vertex array and a triangle table.

    Raises MeshError when an edge is not shared by exactly two faces, when the
    two incident faces traverse it in the same direction (inconsistent
    orientation), when the face graph is disconnected, when a face is
    degenerate, or when the Euler formula does not give an integer genus >= 0.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] not in (3, 4):
        raise MeshError(f"vertices must be (V, 3) or (V, 4), got {vertices.shape}")
    if faces.ndim != 2 or faces.shape[1] != 3:
        raise MeshError(f"faces must be (F, 3) triangles, got {faces.shape}")
    nv = vertices.shape[0]
    if faces.min(initial=0) < 0 or faces.max(initial=-1) >= nv:
        raise MeshError("face indices out of range")
    if np.any(faces[:, 0] == faces[:, 1]) or np.any(faces[:, 1] == faces[:, 2]) \
            or np.any(faces[:, 0] == faces[:, 2]):
        raise MeshError("degenerate face with repeated vertex")

    # Directed edges per face; each undirected edge of a closed oriented
    # manifold must appear exactly once in each direction.
    edge_index: dict[tuple[int, int], int] = {}
    edge_list: list[tuple[int, int]] = []
    # per edge: [face_with_forward_direction, face_with_backward_direction]
    edge_face_list: list[list[int]] = []
    seen_directed: set[tuple[int, int]] = set()
    face_edges = np.empty_like(faces)
    for f, (i, j, k) in enumerate(faces):
        for slot, (a, b) in enumerate(((i, j), (j, k), (k, i))):
            a, b = int(a), int(b)
            if (a, b) in seen_directed:
                raise MeshError(
                    f"inconsistent orientation or non-manifold edge ({a},{b}) at face {f}")
            seen_directed.add((a, b))
            key = (a, b) if a < b else (b, a)
            e = edge_index.get(key)
            if e is None:
                e = len(edge_list)
                edge_index[key] = e
                edge_list.append(key)
                edge_face_list.append([-1, -1])
            side = 0 if (a, b) == key else 1
            if edge_face_list[e][side] != -1:
                raise MeshError(f"non-manifold edge {key}: more than two incident faces")
            edge_face_list[e][side] = f
            face_edges[f, slot] = e

    edges = np.asarray(edge_list, dtype=np.int64)
    edge_faces = np.asarray(edge_face_list, dtype=np.int64)
    if np.any(edge_faces < 0):
        bad = edges[np.any(edge_faces < 0, axis=1)][0]
        raise MeshError(f"boundary edge {tuple(bad)}: mesh is not closed")

    # Single connected component, via union-find over edges.
    parent = np.arange(nv)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[ra] = rb
    roots = {find(v) for v in range(nv)}
    if len(roots) != 1:
        raise MeshError(f"mesh has {len(roots)} connected components, expected 1")

    face_areas = _face_gram_areas(vertices, faces)
    if np.any(face_areas <= 0.0):
        raise MeshError("zero-area face")
    vertex_areas = np.zeros(nv)
    np.add.at(vertex_areas, faces.ravel(), np.repeat(face_areas / 3.0, 3))

    chi = nv - edges.shape[0] + faces.shape[0]
    if chi % 2 != 0 or chi > 2:
        raise MeshError(f"Euler characteristic {chi} is not 2 - 2g for integer g >= 0")
    genus = (2 - chi) // 2

    return SurfaceMesh(
        vertices=vertices, faces=faces, edges=edges, edge_faces=edge_faces,
        face_edges=face_edges, face_areas=face_areas, vertex_areas=vertex_areas,
        genus=genus, _edge_index=edge_index)


def genus(mesh: SurfaceMesh) -> int:
    """Genus from the Euler formula (validated at construction)."""
    return mesh.genus


def integrate_scalar(mesh: SurfaceMesh, u: np.ndarray) -> float:
    """Integral of a per-vertex scalar against the lumped area weights."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.num_vertices,):
        raise ValueError(f"expected ({mesh.num_vertices},) values, got {u.shape}")
    return float(mesh.vertex_areas @ u)


# ---------------------------------------------------------------------------
# File formats: OFF, OBJ (triangles only), and OFF4.
#
# OFF4 is a minimal extension of OFF for surfaces embedded in R^4: the header
# token is "OFF4" and every vertex line carries 4 floats. Counts and face
# lines are standard OFF.
# ---------------------------------------------------------------------------

def _detect_format(path: str, fmt: str | None) -> str:
    if fmt is not None:
        return fmt.lower()
    ext = os.path.splitext(path)[1].lower()
    if ext in (".off", ".off4", ".obj"):
        return ext[1:]
    raise ValueError(f"cannot infer mesh format from '{path}'; pass format explicitly")


def _parse_off(lines: list[str], path: str) -> tuple[np.ndarray, np.ndarray]:
    tokens: list[tuple[int, list[str]]] = []
    for ln, raw in enumerate(lines, start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            tokens.append((ln, body.split()))
    if not tokens:
        raise MeshError(f"{path}: empty file")
    header = tokens[0][1][0].upper()
    if header not in ("OFF", "OFF4"):
        raise MeshError(f"{path}:{tokens[0][0]}: expected OFF or OFF4 header, got '{header}'")
    dim = 4 if header == "OFF4" else 3
    pos = 1
    try:
        nv, nf, _ = (int(t) for t in tokens[pos][1][:3])
    except (ValueError, IndexError):
        raise MeshError(f"{path}:{tokens[pos][0]}: malformed count line") from None
    pos += 1
    verts = np.empty((nv, dim))
    for v in range(nv):
        ln, parts = tokens[pos + v]
        if len(parts) != dim:
            raise MeshError(f"{path}:{ln}: expected {dim} coordinates, got {len(parts)}")
        try:
            verts[v] = [float(t) for t in parts]
        except ValueError:
            raise MeshError(f"{path}:{ln}: bad coordinate") from None
    pos += nv
    faces = np.empty((nf, 3), dtype=np.int64)
    for f in range(nf):
        ln, parts = tokens[pos + f]
        try:
            cnt = int(parts[0])
        except ValueError:
            raise MeshError(f"{path}:{ln}: bad face line") from None
        if cnt != 3 or len(parts) < 4:
            raise MeshError(f"{path}:{ln}: non-triangle face (count {cnt})")
        faces[f] = [int(t) for t in parts[1:4]]
    return verts, faces


def _parse_obj(lines: list[str], path: str) -> tuple[np.ndarray, np.ndarray]:
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    for ln, raw in enumerate(lines, start=1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise MeshError(f"{path}:{ln}: vertex needs 3 coordinates")
            verts.append([float(t) for t in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(t.split("/")[0]) - 1 for t in parts[1:]]
            if len(idx) != 3:
                raise MeshError(f"{path}:{ln}: non-triangle face ({len(idx)} vertices)")
            faces.append(idx)
    return np.asarray(verts, dtype=float), np.asarray(faces, dtype=np.int64)


def load_mesh(path: str, fmt: str | None = None) -> SurfaceMesh:
    """Load and validate a mesh from OFF, OFF4 or OBJ."""
    fmt = _detect_format(path, fmt)
    with open(path) as fh:
        lines = fh.readlines()
    if fmt in ("off", "off4"):
        verts, faces = _parse_off(lines, path)
    elif fmt == "obj":
        verts, faces = _parse_obj(lines, path)
    else:
        raise ValueError(f"unsupported mesh format '{fmt}'")
    return build_connectivity(verts, faces)


def save_mesh(mesh: SurfaceMesh, path: str, fmt: str | None = None) -> None:
    """Write a mesh as OFF, OFF4 or OBJ. R^4 meshes require OFF4."""
    fmt = _detect_format(path, fmt)
    dim = mesh.ambient_dim
    if fmt == "obj" and dim != 3:
        raise ValueError("OBJ carries 3 coordinates only; use OFF4 for R^4 meshes")
    if fmt == "off" and dim == 4:
        fmt = "off4"
    with open(path, "w") as fh:
        if fmt in ("off", "off4"):
            fh.write(("OFF4" if dim == 4 else "OFF") + "\n")
            fh.write(f"{mesh.num_vertices} {mesh.num_faces} {mesh.num_edges}\n")
            for p in mesh.vertices:
                fh.write(" ".join(f"{x:.17g}" for x in p) + "\n")
            for f in mesh.faces:
                fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
        elif fmt == "obj":
            for p in mesh.vertices:
                fh.write("v " + " ".join(f"{x:.17g}" for x in p) + "\n")
            for f in mesh.faces:
                fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
        else:
            raise ValueError(f"unsupported mesh format '{fmt}'")
