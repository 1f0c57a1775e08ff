"""Space forms and pointwise surface geometry.

The ambient space is either R^3 (curvature flag c = 0) or the unit sphere S^3
viewed inside R^4 (c = 1). A surface carries per-vertex data: position, unit
normal N, an oriented orthonormal tangent frame {e1, e2}, and the shape
operator expressed in that frame, with the convention A X = -D_X N. Mean and
Gauss curvature, the squared norm of A, the support functions f_i = <Ebar_i,
nu> (nu = -position, sphere case) and g_i = <Ebar_i, N>, and the tangential
projections E_i of the ambient coordinate directions all derive from these.

Frames are gauge: every exported quantity is invariant under rotating
{e1, e2} in the tangent plane. The orientation of the frame (hence of the
90-degree rotation) is tied to N: in R^3 we require e2 = N x e1; in S^3 we
require det[e1, e2, N, psi] = +1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    """Raised for invalid geometric data or indices."""


@dataclass(frozen=True)
class AmbientSpace:
    """The space form containing the surface: R^3 (c = 0) or S^3 in R^4 (c = 1)."""

    kind: str  # "euclidean3" | "sphere3"
    c: int

    def __post_init__(self):
        if self.kind == "euclidean3" and self.c == 0:
            return
        if self.kind == "sphere3" and self.c == 1:
            return
        raise GeometryError(f"inconsistent ambient space ({self.kind}, c={self.c})")

    @property
    def ambient_dim(self) -> int:
        return 3 + self.c

    @staticmethod
    def euclidean3() -> "AmbientSpace":
        return AmbientSpace("euclidean3", 0)

    @staticmethod
    def sphere3() -> "AmbientSpace":
        return AmbientSpace("sphere3", 1)


EUCLIDEAN3 = AmbientSpace.euclidean3()
SPHERE3 = AmbientSpace.sphere3()


@dataclass(frozen=True)
class GeometryData:
    """Per-vertex differential geometry of an immersed surface.

    positions: (V, 3+c); unit vectors in the sphere case
    normals:   (V, 3+c) unit normal N, orthogonal to psi in the sphere case
    frame_e1, frame_e2: (V, 3+c) oriented orthonormal tangent frame
    shape:     (V, 2, 2) symmetric shape operator in the frame, A X = -D_X N
    mean_h:    (V,) mean curvature H = trace(A) / 2
    gauss_k:   (V,) Gauss curvature
    norm_a2:   (V,) squared Frobenius norm of A
    source:    "analytic" (closed-form) or "fitted" (estimated from the mesh)
    normal_convention: short description of how N was chosen, for reports
    """

    positions: np.ndarray
    normals: np.ndarray
    frame_e1: np.ndarray
    frame_e2: np.ndarray
    shape: np.ndarray
    mean_h: np.ndarray
    gauss_k: np.ndarray
    norm_a2: np.ndarray
    source: str
    normal_convention: str

    @property
    def num_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.positions.shape[1]

    def cmc_tolerance(self) -> float:
        """Accepted relative spread of H: tight for analytic, loose for fitted."""
        return 1e-6 if self.source == "analytic" else 5e-2

    def median_h(self) -> float:
        return float(np.median(self.mean_h))

    def cmc_deviation(self) -> float:
        """max |H - median(H)| / (1 + |median(H)|) over vertices."""
        med = self.median_h()
        return float(np.max(np.abs(self.mean_h - med)) / (1.0 + abs(med)))

    def is_cmc(self) -> bool:
        return self.cmc_deviation() <= self.cmc_tolerance()


def cross4(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Generalized cross product in R^4: d with <d, w> = det[a, b, c, w].

    Inputs are (..., 4) arrays; the result is orthogonal to a, b and c and
    det[a, b, c, d] = |d|^2 >= 0.
    """
    cols = np.stack([a, b, c], axis=-1)  # (..., 4, 3)
    out = np.empty(a.shape)
    rows = np.arange(4)
    for r in range(4):
        keep = rows[rows != r]
        m = cols[..., keep, :]  # (..., 3, 3)
        det3 = (m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
                - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
                + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0]))
        out[..., r] = ((-1.0) ** (r + 1)) * det3
    return out


def oriented_e2(e1: np.ndarray, normals: np.ndarray, positions: np.ndarray,
                space: AmbientSpace) -> np.ndarray:
    """Complete a unit tangent e1 to the oriented frame: the image of e1 under
    the 90-degree rotation that N (and psi, sphere case) induce."""
    if space.c == 0:
        return np.cross(normals, e1)
    return cross4(normals, positions, e1)


def tangent_projector_apply(geom: GeometryData, space: AmbientSpace,
                            vectors: np.ndarray) -> np.ndarray:
    """Project ambient vectors onto the tangent plane at each vertex."""
    out = vectors - np.einsum("ij,ij->i", vectors, geom.normals)[:, None] * geom.normals
    if space.c == 1:
        out = out - np.einsum("ij,ij->i", out, geom.positions)[:, None] * geom.positions
    return out


def rotate90_vertex(geom: GeometryData, vectors: np.ndarray) -> np.ndarray:
    """90-degree rotation of tangent vectors in each vertex tangent plane."""
    a = np.einsum("ij,ij->i", vectors, geom.frame_e1)
    b = np.einsum("ij,ij->i", vectors, geom.frame_e2)
    return a[:, None] * geom.frame_e2 - b[:, None] * geom.frame_e1


def ambient_shape_tensor(geom: GeometryData) -> np.ndarray:
    """Shape operator as an ambient (V, d, d) symmetric tensor supported on
    the tangent plane: sum_ab S_ab e_a (x) e_b."""
    e = np.stack([geom.frame_e1, geom.frame_e2], axis=1)  # (V, 2, d)
    return np.einsum("vab,vai,vbj->vij", geom.shape, e, e)


def _check_index(space: AmbientSpace, i: int) -> None:
    if not 0 <= i < space.ambient_dim:
        raise GeometryError(f"basis index {i} out of range 0..{space.ambient_dim - 1}")


def support_functions(geom: GeometryData, space: AmbientSpace,
                      i: int) -> tuple[np.ndarray, np.ndarray]:
    """Support functions (f_i, g_i) of the i-th ambient coordinate direction.

    g_i = <Ebar_i, N> always; f_i = <Ebar_i, nu> with nu = -psi in the sphere
    case and identically zero in R^3 (every use carries a factor c).
    """
    _check_index(space, i)
    g = geom.normals[:, i].copy()
    if space.c == 1:
        f = -geom.positions[:, i]
    else:
        f = np.zeros(geom.num_vertices)
    return f, g


def project_ambient_basis(geom: GeometryData, space: AmbientSpace, i: int) -> np.ndarray:
    """Tangential projection E_i of the i-th parallel ambient basis vector:
    E_i = Ebar_i - <Ebar_i, N> N - c <Ebar_i, nu> nu."""
    _check_index(space, i)
    norms = np.einsum("ij,ij->i", geom.normals, geom.normals)
    if np.max(np.abs(norms - 1.0)) > 1e-8:
        raise GeometryError("normals are not unit vectors")
    f, g = support_functions(geom, space, i)
    e = np.zeros((geom.num_vertices, space.ambient_dim))
    e[:, i] = 1.0
    out = e - g[:, None] * geom.normals
    if space.c == 1:
        out = out - f[:, None] * (-geom.positions)
    return out


def gauss_equation_residual(geom: GeometryData, space: AmbientSpace) -> np.ndarray:
    """Per-vertex residual K - c - 2 H^2 + |A|^2 / 2 (zero for exact geometry)."""
    return geom.gauss_k - space.c - 2.0 * geom.mean_h ** 2 + 0.5 * geom.norm_a2


def shape_identity_residual(geom: GeometryData) -> np.ndarray:
    """Per-vertex Frobenius norm of A^2 - (|A|^2 - 4H^2)/2 I - 2 H A."""
    a = geom.shape
    a2 = a @ a
    eye = np.eye(2)[None, :, :]
    res = a2 - 0.5 * (geom.norm_a2 - 4.0 * geom.mean_h ** 2)[:, None, None] * eye \
        - 2.0 * geom.mean_h[:, None, None] * a
    return np.linalg.norm(res, axis=(1, 2))


def frame_residuals(geom: GeometryData, space: AmbientSpace) -> dict[str, float]:
    """Max violations of the frame invariants: unit/orthogonal vectors,
    tangency, and orientation (det[e1, e2, N(, psi)] = +1)."""
    e1, e2, n, p = geom.frame_e1, geom.frame_e2, geom.normals, geom.positions
    out = {
        "unit_normal": float(np.max(np.abs(np.einsum("ij,ij->i", n, n) - 1.0))),
        "unit_e1": float(np.max(np.abs(np.einsum("ij,ij->i", e1, e1) - 1.0))),
        "unit_e2": float(np.max(np.abs(np.einsum("ij,ij->i", e2, e2) - 1.0))),
        "e1_dot_e2": float(np.max(np.abs(np.einsum("ij,ij->i", e1, e2)))),
        "e1_dot_n": float(np.max(np.abs(np.einsum("ij,ij->i", e1, n)))),
        "e2_dot_n": float(np.max(np.abs(np.einsum("ij,ij->i", e2, n)))),
    }
    expected = oriented_e2(e1, n, p, space)
    out["orientation"] = float(np.max(np.linalg.norm(expected - e2, axis=1)))
    if space.c == 1:
        out["position_unit"] = float(np.max(np.abs(np.einsum("ij,ij->i", p, p) - 1.0)))
        out["n_dot_position"] = float(np.max(np.abs(np.einsum("ij,ij->i", n, p))))
    return out


def rotate_frame(geom: GeometryData, angle: float) -> GeometryData:
    """Gauge transform: rotate the tangent frame by a fixed angle and update
    the shape matrix accordingly. Used to test frame invariance."""
    ca, sa = np.cos(angle), np.sin(angle)
    e1 = ca * geom.frame_e1 + sa * geom.frame_e2
    e2 = -sa * geom.frame_e1 + ca * geom.frame_e2
    rot = np.array([[ca, sa], [-sa, ca]])
    shape = np.einsum("ab,vbc,dc->vad", rot, geom.shape, rot)
    return GeometryData(
        positions=geom.positions, normals=geom.normals, frame_e1=e1, frame_e2=e2,
        shape=shape, mean_h=geom.mean_h, gauss_k=geom.gauss_k, norm_a2=geom.norm_a2,
        source=geom.source, normal_convention=geom.normal_convention)


# ---------------------------------------------------------------------------
# Estimated geometry for ingested meshes: local quadric fit over the 2-ring.
# ---------------------------------------------------------------------------

def _vertex_normals(mesh, space: AmbientSpace) -> np.ndarray:
    """Area-weighted vertex normals consistent with the face winding.

    In R^3 the face normal is the winding cross product. In S^3 it is the
    unit vector orthogonal to the face plane and to psi at the barycenter,
    signed so that det[u, v, n, psi] > 0.
    """
    verts, faces = mesh.vertices, mesh.faces
    p0 = verts[faces[:, 0]]
    u = verts[faces[:, 1]] - p0
    v = verts[faces[:, 2]] - p0
    if space.c == 0:
        fn = np.cross(u, v)
    else:
        bary = (p0 + verts[faces[:, 1]] + verts[faces[:, 2]]) / 3.0
        bary /= np.linalg.norm(bary, axis=1, keepdims=True)
        fn = cross4(u, v, bary)
        # det[u, v, fn, bary] = -det[u, v, bary, fn] = -|fn'|^2 < 0 for
        # fn' = cross4(u, v, bary); flip to satisfy det[u, v, n, psi] > 0.
        fn = -fn
    n = np.zeros_like(verts)
    np.add.at(n, faces[:, 0], fn)
    np.add.at(n, faces[:, 1], fn)
    np.add.at(n, faces[:, 2], fn)
    if space.c == 1:
        n -= np.einsum("ij,ij->i", n, verts)[:, None] * verts
    norms = np.linalg.norm(n, axis=1)
    if np.any(norms <= 0):
        raise GeometryError("degenerate vertex normal during fitting")
    return n / norms[:, None]


def fit_geometry(mesh, space: AmbientSpace) -> GeometryData:
    """Per-vertex geometry estimated from an ingested mesh.

    The normal comes from area-weighted face normals; the shape operator from
    a least-squares quadric fit of 2-ring neighbour heights over the tangent
    plane (with linear terms absorbing normal misestimation), symmetrized by
    construction. Gauss curvature is c + det(A).
    """
    verts = mesh.vertices
    nv = mesh.num_vertices
    if space.c == 1:
        norms = np.linalg.norm(verts, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-6:
            raise GeometryError("sphere-case mesh vertices must lie on the unit sphere")
    normals = _vertex_normals(mesh, space)

    neighbors: list[set[int]] = [set() for _ in range(nv)]
    for a, b in mesh.edges:
        neighbors[a].add(int(b))
        neighbors[b].add(int(a))

    # Arbitrary incident edge seeds the frame; Gram-Schmidt against N (and psi).
    e1 = np.zeros_like(verts)
    for v in range(nv):
        for w in neighbors[v]:
            cand = verts[w] - verts[v]
            cand = cand - (cand @ normals[v]) * normals[v]
            if space.c == 1:
                cand = cand - (cand @ verts[v]) * verts[v]
            ln = np.linalg.norm(cand)
            if ln > 1e-12:
                e1[v] = cand / ln
                break
        else:
            raise GeometryError(f"no usable frame seed at vertex {v}")
    e2 = oriented_e2(e1, normals, verts, space)

    shape = np.zeros((nv, 2, 2))
    for v in range(nv):
        ring = set(neighbors[v])
        for w in list(neighbors[v]):
            ring |= neighbors[w]
        ring.discard(v)
        ring_idx = np.fromiter(ring, dtype=np.int64)
        d = verts[ring_idx] - verts[v]
        x = d @ e1[v]
        y = d @ e2[v]
        h = d @ normals[v]
        # h ~ a x^2/2 + b x y + c y^2/2 + d1 x + d2 y
        cols = np.column_stack([0.5 * x * x, x * y, 0.5 * y * y, x, y])
        coef, *_ = np.linalg.lstsq(cols, h, rcond=None)
        shape[v] = [[coef[0], coef[1]], [coef[1], coef[2]]]

    mean_h = 0.5 * np.trace(shape, axis1=1, axis2=2)
    det_a = shape[:, 0, 0] * shape[:, 1, 1] - shape[:, 0, 1] * shape[:, 1, 0]
    gauss_k = space.c + det_a
    norm_a2 = np.einsum("vab,vab->v", shape, shape)
    return GeometryData(
        positions=verts, normals=normals, frame_e1=e1, frame_e2=e2, shape=shape,
        mean_h=mean_h, gauss_k=gauss_k, norm_a2=norm_a2, source="fitted",
        normal_convention="area-weighted face normals from the stored winding")
