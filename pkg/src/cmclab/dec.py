"""Discrete exterior calculus on triangle meshes.

0-forms are per-vertex scalars, 1-forms are per-oriented-edge scalars (the
integral of the form along the edge, with the canonical orientation running
from the smaller to the larger vertex index). Operators:

  d0  (E x V)  signed incidence, (d0 u)_e = u[head] - u[tail]
  d1  (F x E)  signed incidence from the face winding; d1 d0 = 0 exactly
  M0  (V x V)  diagonal lumped mass (barycentric vertex areas)
  M0c (V x V)  consistent P1 mass
  M1  (E x E)  Galerkin mass of lowest-order Whitney edge elements
  M2  (F x F)  diagonal 1/area
  L0  (V x V)  stiffness of P1 hats (the weak scalar Laplacian; cotangent)
  L1  (E x E)  weak Hodge Laplacian on 1-forms,
               M1 d0 M0^-1 d0^T M1  +  d1^T M2 d1

All are symmetric; L0 and L1 are positive semidefinite, with ker L0 the
constants and dim ker L1 = 2 genus. Tangent fields are piecewise constant per
face (Whitney interpolation evaluated at barycenters); in the sphere case
face vectors are additionally projected orthogonally to the position at the
barycenter so they stay tangent to S^3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ambient import AmbientSpace, GeometryData, tangent_projector_apply
from .mesh import SurfaceMesh


class DecError(ValueError):
    """Raised for invalid fields or when the harmonic space cannot be separated."""


@dataclass(frozen=True)
class OperatorSet:
    """Assembled discrete operators for one mesh (immutable, shareable)."""

    mesh: SurfaceMesh
    d0: sp.csr_matrix
    d1: sp.csr_matrix
    M0: sp.csr_matrix
    M0c: sp.csr_matrix
    M1: sp.csr_matrix
    M2: sp.csr_matrix
    L0: sp.csr_matrix
    L1: sp.csr_matrix
    hat_gradients: np.ndarray   # (F, 3, d) gradients of the P1 hats per face
    slot_tail: np.ndarray       # (F, 3) local corner of each slot edge's tail
    slot_head: np.ndarray       # (F, 3) ... and head (canonical orientation)
    face_t1: np.ndarray         # (F, d) oriented orthonormal face frame
    face_t2: np.ndarray
    face_barycenters: np.ndarray

    def named_matrices(self) -> dict[str, sp.csr_matrix]:
        return {"d0": self.d0, "d1": self.d1, "M0": self.M0, "M0c": self.M0c,
                "M1": self.M1, "M2": self.M2, "L0": self.L0, "L1": self.L1}


@dataclass(frozen=True)
class TangentField:
    """Per-face tangent vectors, optionally remembering the edge cochain they
    were interpolated from."""

    face_values: np.ndarray            # (F, d)
    cochain: np.ndarray | None = None  # (E,)

    @property
    def num_faces(self) -> int:
        return self.face_values.shape[0]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.face_values, axis=1)


def assemble_operators(mesh: SurfaceMesh) -> OperatorSet:
    """Assemble every operator for a validated closed oriented mesh."""
    verts, faces, edges = mesh.vertices, mesh.faces, mesh.edges
    nv, ne, nf = mesh.num_vertices, mesh.num_edges, mesh.num_faces
    dim = mesh.ambient_dim
    areas = mesh.face_areas

    p0 = verts[faces[:, 0]]
    u = verts[faces[:, 1]] - p0
    v = verts[faces[:, 2]] - p0
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    uv = np.einsum("ij,ij->i", u, v)
    det = uu * vv - uv * uv
    if np.any(det <= 0.0):
        raise DecError("degenerate face in operator assembly")

    # P1 hat gradients from the edge Gram matrix (any ambient dimension):
    # grad(hat_1) = alpha u + beta v with G [alpha, beta]^T = [1, 0]^T.
    g1 = ((vv / det)[:, None] * u - (uv / det)[:, None] * v)
    g2 = (-(uv / det)[:, None] * u + (uu / det)[:, None] * v)
    grads = np.stack([-g1 - g2, g1, g2], axis=1)  # (F, 3, d)

    # Oriented face frame; in the sphere case, re-projected orthogonally to
    # the barycenter direction so interpolated fields are tangent to S^3.
    bary = (p0 + verts[faces[:, 1]] + verts[faces[:, 2]]) / 3.0
    t1 = u.copy()
    t2 = v.copy()
    if dim == 4:
        bhat = bary / np.linalg.norm(bary, axis=1, keepdims=True)
        t1 -= np.einsum("ij,ij->i", t1, bhat)[:, None] * bhat
        t2 -= np.einsum("ij,ij->i", t2, bhat)[:, None] * bhat
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 -= np.einsum("ij,ij->i", t2, t1)[:, None] * t1
    t2 /= np.linalg.norm(t2, axis=1, keepdims=True)

    # d0 over canonical edge orientations.
    rows = np.repeat(np.arange(ne), 2)
    cols = edges.ravel()
    vals = np.tile([-1.0, 1.0], ne)
    d0 = sp.csr_matrix((vals, (rows, cols)), shape=(ne, nv))

    # d1 and the local canonical corner pairs (tail, head) per face slot.
    corner_pairs = ((0, 1), (1, 2), (2, 0))
    slot_sign = np.empty((nf, 3))
    ptail = np.empty((nf, 3), dtype=np.int64)
    qhead = np.empty((nf, 3), dtype=np.int64)
    for s, (ca, cb) in enumerate(corner_pairs):
        forward = faces[:, ca] < faces[:, cb]
        slot_sign[:, s] = np.where(forward, 1.0, -1.0)
        ptail[:, s] = np.where(forward, ca, cb)
        qhead[:, s] = np.where(forward, cb, ca)
    d1 = sp.csr_matrix(
        (slot_sign.ravel(),
         (np.repeat(np.arange(nf), 3), mesh.face_edges.ravel())),
        shape=(nf, ne))

    M0 = sp.diags(mesh.vertex_areas).tocsr()
    M2 = sp.diags(1.0 / areas).tocsr()

    # L0 and consistent M0 from 3x3 local blocks.
    gg = np.einsum("fad,fbd->fab", grads, grads)           # (F, 3, 3)
    l0_loc = areas[:, None, None] * gg
    lam = (areas / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    rows3 = np.repeat(faces, 3, axis=1).ravel()            # f: a a a b b b c c c
    cols3 = np.tile(faces, (1, 3)).ravel()
    L0 = sp.csr_matrix((l0_loc.ravel(), (rows3, cols3)), shape=(nv, nv))
    M0c = sp.csr_matrix((lam.ravel(), (rows3, cols3)), shape=(nv, nv))

    # Whitney edge mass: W_e = hat_a grad(hat_b) - hat_b grad(hat_a) over the
    # canonical pair (a, b); integrate products with the exact P1 quadrature.
    fidx = np.arange(nf)
    m1_loc = np.empty((nf, 3, 3))
    for s in range(3):
        ps, qs = ptail[:, s], qhead[:, s]
        for t in range(3):
            pt, qt = ptail[:, t], qhead[:, t]
            m1_loc[:, s, t] = (
                lam[fidx, ps, pt] * gg[fidx, qs, qt]
                - lam[fidx, ps, qt] * gg[fidx, qs, pt]
                - lam[fidx, qs, pt] * gg[fidx, ps, qt]
                + lam[fidx, qs, qt] * gg[fidx, ps, pt])
    rows_e = np.repeat(mesh.face_edges, 3, axis=1).ravel()
    cols_e = np.tile(mesh.face_edges, (1, 3)).ravel()
    M1 = sp.csr_matrix((m1_loc.ravel(), (rows_e, cols_e)), shape=(ne, ne))

    m0_inv = sp.diags(1.0 / mesh.vertex_areas)
    div_part = (M1 @ d0) @ m0_inv @ (d0.T @ M1)
    curl_part = d1.T @ M2 @ d1
    L1 = (div_part + curl_part).tocsr()
    L1 = ((L1 + L1.T) * 0.5).tocsr()
    L0 = ((L0 + L0.T) * 0.5).tocsr()

    return OperatorSet(
        mesh=mesh, d0=d0, d1=d1.tocsr(), M0=M0, M0c=M0c, M1=M1, M2=M2,
        L0=L0, L1=L1, hat_gradients=grads, slot_tail=ptail, slot_head=qhead,
        face_t1=t1, face_t2=t2, face_barycenters=bary)


def weighted_mass(mesh: SurfaceMesh, weight: np.ndarray) -> sp.csr_matrix:
    """Consistent P1 mass matrix of integral(w u v) for a per-vertex weight w,
    with w interpolated linearly (exact cubic quadrature per face)."""
    weight = np.asarray(weight, dtype=float)
    if weight.shape != (mesh.num_vertices,):
        raise DecError("weight must be a per-vertex scalar")
    # T[a, b, c] = integral over the reference face of hat_a hat_b hat_c / area
    t = np.empty((3, 3, 3))
    for a in range(3):
        for b in range(3):
            for c in range(3):
                same = (a == b) + (b == c) + (a == c)
                t[a, b, c] = (1 + same + 2 * (a == b == c)) / 60.0
    wf = weight[mesh.faces]  # (F, 3)
    loc = mesh.face_areas[:, None, None] * np.einsum("abc,fc->fab", t, wf)
    rows = np.repeat(mesh.faces, 3, axis=1).ravel()
    cols = np.tile(mesh.faces, (1, 3)).ravel()
    nv = mesh.num_vertices
    out = sp.csr_matrix((loc.ravel(), (rows, cols)), shape=(nv, nv))
    return ((out + out.T) * 0.5).tocsr()


# ---------------------------------------------------------------------------
# Musical isomorphisms and pointwise operations on fields
# ---------------------------------------------------------------------------

def sharp(ops: OperatorSet, omega: np.ndarray) -> TangentField:
    """Whitney interpolation of an edge cochain, evaluated at face barycenters."""
    omega = np.asarray(omega, dtype=float)
    mesh = ops.mesh
    if omega.shape != (mesh.num_edges,):
        raise DecError(f"expected ({mesh.num_edges},) cochain, got {omega.shape}")
    vals = omega[mesh.face_edges]  # (F, 3)
    fidx = np.arange(mesh.num_faces)[:, None]
    # Whitney value at the barycenter: (grad hat_head - grad hat_tail) / 3.
    diff = ops.hat_gradients[fidx, ops.slot_head] - ops.hat_gradients[fidx, ops.slot_tail]
    vecs = np.einsum("fs,fsd->fd", vals, diff / 3.0)
    # Keep vectors in the (projected) face plane.
    c1 = np.einsum("fd,fd->f", vecs, ops.face_t1)
    c2 = np.einsum("fd,fd->f", vecs, ops.face_t2)
    vecs = c1[:, None] * ops.face_t1 + c2[:, None] * ops.face_t2
    return TangentField(face_values=vecs, cochain=omega)


def flat(ops: OperatorSet, field: TangentField) -> np.ndarray:
    """de Rham map of a per-face field: edge value = chord dotted with the
    average of the two incident face vectors."""
    mesh = ops.mesh
    if field.face_values.shape != (mesh.num_faces, mesh.ambient_dim):
        raise DecError("face value array has wrong shape")
    chords = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
    avg = 0.5 * (field.face_values[mesh.edge_faces[:, 0]]
                 + field.face_values[mesh.edge_faces[:, 1]])
    return np.einsum("ed,ed->e", chords, avg)


def rotate90(ops: OperatorSet, field: TangentField,
             tangency_tol: float = 1e-6) -> TangentField:
    """Pointwise 90-degree rotation in each face plane, oriented by the
    winding (hence by the surface normal). rotate90 twice negates a field."""
    x = field.face_values
    c1 = np.einsum("fd,fd->f", x, ops.face_t1)
    c2 = np.einsum("fd,fd->f", x, ops.face_t2)
    inplane = c1[:, None] * ops.face_t1 + c2[:, None] * ops.face_t2
    off = np.linalg.norm(x - inplane, axis=1)
    scale = np.maximum(np.linalg.norm(x, axis=1), 1e-30)
    worst = float(np.max(off / scale))
    if worst > tangency_tol:
        raise DecError(f"field is not tangent to the faces (deviation {worst:.3e})")
    return TangentField(face_values=c1[:, None] * ops.face_t2
                        - c2[:, None] * ops.face_t1)


def vertex_field(ops: OperatorSet, geom: GeometryData, space: AmbientSpace,
                 field: TangentField) -> np.ndarray:
    """Pointwise vertex values of a per-face field: area-weighted average of
    incident face vectors, re-projected to the vertex tangent plane."""
    mesh = ops.mesh
    acc = np.zeros((mesh.num_vertices, mesh.ambient_dim))
    wsum = np.zeros(mesh.num_vertices)
    w = mesh.face_areas
    for corner in range(3):
        idx = mesh.faces[:, corner]
        np.add.at(acc, idx, w[:, None] * field.face_values)
        np.add.at(wsum, idx, w)
    acc /= wsum[:, None]
    return tangent_projector_apply(geom, space, acc)


def divergence(ops: OperatorSet, field: TangentField) -> np.ndarray:
    """Weak divergence of a face field: minus the codifferential of its flat."""
    omega = flat(ops, field)
    delta = (ops.d0.T @ (ops.M1 @ omega)) / ops.mesh.vertex_areas
    return -delta


def codifferential(ops: OperatorSet, omega: np.ndarray) -> np.ndarray:
    """Weak codifferential of an edge cochain (a 0-form)."""
    return (ops.d0.T @ (ops.M1 @ omega)) / ops.mesh.vertex_areas


def covariant_gradient(ops: OperatorSet, geom: GeometryData, space: AmbientSpace,
                       field: TangentField) -> np.ndarray:
    """Per-face in-plane Jacobian of a tangent field, in the (t1, t2) frame.

    The vertex-recovered field is interpolated linearly per face; projecting
    the ambient derivative into the face plane approximates the covariant
    derivative (the tangential part of the ambient one).
    """
    amb = covariant_gradient_ambient(ops, geom, space, field)
    t = np.stack([ops.face_t1, ops.face_t2], axis=1)  # (F, 2, d)
    return np.einsum("fai,fij,fbj->fab", t, amb, t)


def covariant_gradient_ambient(ops: OperatorSet, geom: GeometryData,
                               space: AmbientSpace,
                               field: TangentField) -> np.ndarray:
    """Ambient (F, d, d) tensor grad(xi) projected into the face plane on
    both slots; the frame form above is its (t1, t2) expression."""
    mesh = ops.mesh
    xv = vertex_field(ops, geom, space, field)
    raw = np.einsum("fcd,fce->fde", xv[mesh.faces], ops.hat_gradients)
    proj = (np.einsum("fi,fj->fij", ops.face_t1, ops.face_t1)
            + np.einsum("fi,fj->fij", ops.face_t2, ops.face_t2))
    return np.einsum("fik,fkl,fjl->fij", proj, raw, proj)


# ---------------------------------------------------------------------------
# Harmonic fields
# ---------------------------------------------------------------------------

HARMONIC_GAP_FACTOR = 1e-3


def harmonic_basis(ops: OperatorSet, *, solver=None) -> list[np.ndarray]:
    """M1-orthonormal basis of the discrete harmonic 1-forms (2g cochains).

    A cochain counts as harmonic when its Rayleigh quotient sits below
    HARMONIC_GAP_FACTOR times the (2g+1)-th eigenvalue of (L1, M1); both its
    exact-energy and coexact-energy parts must individually pass. Raises
    DecError when the spectral gap does not separate the kernel.
    """
    from .eigen import solve_lowest

    mesh = ops.mesh
    g = mesh.genus
    k = 2 * g + 1
    result = solver(ops.L1, ops.M1, k) if solver is not None else solve_lowest(
        ops.L1, ops.M1, k, lower_bound=0.0)
    lam = result.eigenvalues
    threshold = HARMONIC_GAP_FACTOR * lam[2 * g]
    if g == 0:
        return []
    if lam[2 * g - 1] > threshold:
        raise DecError(
            "harmonic space not separated by the spectral gap: "
            f"eigenvalue {lam[2 * g - 1]:.3e} vs threshold {threshold:.3e} "
            f"(next eigenvalue {lam[2 * g]:.3e})")

    basis = []
    for i in range(2 * g):
        omega = result.eigenvectors[:, i]
        m_omega = ops.M1 @ omega
        coexact_energy = float(omega @ (ops.d1.T @ (ops.M2 @ (ops.d1 @ omega))))
        exact_energy = float((ops.d0.T @ m_omega) @
                             ((ops.d0.T @ m_omega) / mesh.vertex_areas))
        norm2 = float(omega @ m_omega)
        if max(coexact_energy, exact_energy) > threshold * norm2:
            raise DecError(
                f"candidate harmonic field {i} fails the closed/co-closed check "
                f"(dd* energy {exact_energy:.3e}, d*d energy {coexact_energy:.3e})")
        basis.append(omega)

    # Polish M1-orthonormality of the returned pair(s).
    mat = np.column_stack(basis)
    overlap = mat.T @ (ops.M1 @ mat)
    w, q = np.linalg.eigh(overlap)
    mat = mat @ (q / np.sqrt(w))
    return [mat[:, i] for i in range(mat.shape[1])]
