"""Analytic generators of discretized CMC surfaces with exact vertex geometry.

Three families:
  sphere-r3          round sphere of radius r in R^3 (icosahedral subdivision)
  geodesic-sphere-s3 geodesic sphere of radius rho in S^3 (0 < rho < pi/2)
  product-torus-s3   flat product torus (a cos u, a sin u, b cos v, b sin v)
                     in S^3 with a^2 + b^2 = 1 (uniform grid, uniform
                     diagonal split)

Geometry is populated from closed forms, so curvature carries no
discretization error. Normals follow A X = -D_X N with the sign fixed so the
curvature data below hold; the choice is recorded per surface:
  spheres: inward normal, A = I/r resp. cot(rho) I, H = 1/r resp. cot(rho)
  torus:   N with principal curvature +b/a along the u-circles,
           H = (b^2 - a^2) / (2ab)

Face winding always matches the orientation induced by N.

`analytic_spectra` returns exact reference eigenvalue lists (Jacobi operator,
Hodge Laplacian on 1-forms, scalar Laplacian) built from the classical
spectra of spheres and flat tori.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ambient import (EUCLIDEAN3, SPHERE3, AmbientSpace, GeometryData,
                      GeometryError, oriented_e2)
from .mesh import SurfaceMesh, build_connectivity

KINDS = ("sphere-r3", "geodesic-sphere-s3", "product-torus-s3")


@dataclass(frozen=True)
class ZooSpec:
    """A zoo surface: kind, one shape parameter, and a mesh resolution.

    resolution: icosahedral subdivision level for spheres; grid size for the
    torus (a single int gives a square grid, a pair gives m x n).
    """

    kind: str
    resolution: int | tuple[int, int]
    radius: float = 1.0     # sphere-r3
    rho: float = math.pi / 3  # geodesic-sphere-s3
    a: float = 1.0 / math.sqrt(2.0)  # product-torus-s3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown surface kind '{self.kind}'")
        res = self.resolution
        if isinstance(res, tuple):
            if self.kind != "product-torus-s3":
                raise ValueError("grid resolution only applies to the torus")
            ok = len(res) == 2 and all(int(r) == r and r >= 3 for r in res)
        else:
            ok = int(res) == res and res >= 3
        if not ok:
            raise ValueError(f"resolution must be >= 3, got {res}")
        if self.kind == "sphere-r3" and not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.kind == "geodesic-sphere-s3" and not 0 < self.rho < math.pi / 2:
            raise ValueError("rho must lie in (0, pi/2)")
        if self.kind == "product-torus-s3" and not 0 < self.a < 1:
            raise ValueError("a must lie in (0, 1)")

    @property
    def space(self) -> AmbientSpace:
        return EUCLIDEAN3 if self.kind == "sphere-r3" else SPHERE3

    @property
    def b(self) -> float:
        return math.sqrt(1.0 - self.a * self.a)

    def grid(self) -> tuple[int, int]:
        res = self.resolution
        return res if isinstance(res, tuple) else (int(res), int(res))

    def label(self) -> str:
        if self.kind == "sphere-r3":
            return f"sphere-r3(r={self.radius:g}, res={self.resolution})"
        if self.kind == "geodesic-sphere-s3":
            return f"geodesic-sphere-s3(rho={self.rho:g}, res={self.resolution})"
        m, n = self.grid()
        return f"product-torus-s3(a={self.a:g}, res={m}x{n})"


# ---------------------------------------------------------------------------
# Icosahedral sphere meshing
# ---------------------------------------------------------------------------

def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return verts, faces


def _subdivided_unit_sphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Icosphere: `level` rounds of midpoint subdivision, reprojected each round.

    Faces wind counterclockwise as seen from outside.
    """
    verts, faces = _icosahedron()
    for _ in range(level):
        vlist = list(verts)
        midpoint: dict[tuple[int, int], int] = {}

        def mid(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            m = midpoint.get(key)
            if m is None:
                p = vlist[i] + vlist[j]
                p /= np.linalg.norm(p)
                m = len(vlist)
                vlist.append(p)
                midpoint[key] = m
            return m

        new_faces = []
        for i, j, k in faces:
            ij, jk, ki = mid(i, j), mid(j, k), mid(k, i)
            new_faces += [[i, ij, ki], [ij, j, jk], [ki, jk, k], [ij, jk, ki]]
        verts = np.asarray(vlist)
        faces = np.asarray(new_faces, dtype=np.int64)
    return verts, faces


def _seed_frame(normals: np.ndarray, positions: np.ndarray,
                space: AmbientSpace) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic oriented frame: Gram-Schmidt of the ambient axis least
    aligned with N (frames are gauge; tests verify invariance)."""
    nv, dim = normals.shape
    axis = np.argmin(np.abs(normals), axis=1)
    e1 = np.zeros((nv, dim))
    e1[np.arange(nv), axis] = 1.0
    e1 -= np.einsum("ij,ij->i", e1, normals)[:, None] * normals
    if space.c == 1:
        e1 -= np.einsum("ij,ij->i", e1, positions)[:, None] * positions
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    return e1, oriented_e2(e1, normals, positions, space)


def _umbilic_geometry(positions: np.ndarray, normals: np.ndarray, kappa: float,
                      gauss_k: float, space: AmbientSpace,
                      convention: str) -> GeometryData:
    nv = positions.shape[0]
    e1, e2 = _seed_frame(normals, positions, space)
    shape = np.broadcast_to(kappa * np.eye(2), (nv, 2, 2)).copy()
    return GeometryData(
        positions=positions, normals=normals, frame_e1=e1, frame_e2=e2,
        shape=shape, mean_h=np.full(nv, kappa), gauss_k=np.full(nv, gauss_k),
        norm_a2=np.full(nv, 2.0 * kappa * kappa), source="analytic",
        normal_convention=convention)


def _generate_sphere_r3(spec: ZooSpec) -> tuple[SurfaceMesh, GeometryData]:
    omega, faces = _subdivided_unit_sphere(int(spec.resolution))
    r = spec.radius
    # Inward normal makes A = I/r, H = 1/r under A X = -D_X N; the winding is
    # flipped accordingly so faces stay positively oriented for this N.
    faces = faces[:, [0, 2, 1]]
    mesh = build_connectivity(r * omega, faces)
    geom = _umbilic_geometry(mesh.vertices, -omega, 1.0 / r, 1.0 / r ** 2,
                             EUCLIDEAN3, "inward (A = I/r, H = 1/r)")
    return mesh, geom


def _generate_geodesic_sphere_s3(spec: ZooSpec) -> tuple[SurfaceMesh, GeometryData]:
    omega, faces = _subdivided_unit_sphere(int(spec.resolution))
    rho = spec.rho
    positions = np.column_stack([math.sin(rho) * omega,
                                 np.full(omega.shape[0], math.cos(rho))])
    normals = np.column_stack([-math.cos(rho) * omega,
                               np.full(omega.shape[0], math.sin(rho))])
    faces = faces[:, [0, 2, 1]]
    mesh = build_connectivity(positions, faces)
    kappa = 1.0 / math.tan(rho)
    geom = _umbilic_geometry(mesh.vertices, normals, kappa,
                             1.0 / math.sin(rho) ** 2, SPHERE3,
                             "toward the pole (A = cot(rho) I, H = cot(rho))")
    return mesh, geom


def _generate_product_torus_s3(spec: ZooSpec) -> tuple[SurfaceMesh, GeometryData]:
    m, n = spec.grid()
    a, b = spec.a, spec.b
    u = 2.0 * math.pi * np.arange(m) / m
    v = 2.0 * math.pi * np.arange(n) / n
    uu, vv = np.meshgrid(u, v, indexing="ij")
    uu, vv = uu.ravel(), vv.ravel()
    positions = np.column_stack([a * np.cos(uu), a * np.sin(uu),
                                 b * np.cos(vv), b * np.sin(vv)])
    normals = np.column_stack([-b * np.cos(uu), -b * np.sin(uu),
                               a * np.cos(vv), a * np.sin(vv)])
    e1 = np.column_stack([-np.sin(uu), np.cos(uu),
                          np.zeros_like(uu), np.zeros_like(uu)])
    e2 = np.column_stack([np.zeros_like(vv), np.zeros_like(vv),
                          -np.sin(vv), np.cos(vv)])
    check = oriented_e2(e1, normals, positions, SPHERE3)
    if np.max(np.linalg.norm(check - e2, axis=1)) > 1e-12:
        raise GeometryError("torus frame orientation inconsistent")

    def vid(i: int, j: int) -> int:
        return (i % m) * n + (j % n)

    # Uniform diagonal split: every vertex sees the same six-triangle
    # neighbourhood, so vertex areas are constant and pointwise strong-form
    # operators stay consistent under refinement. (An alternating split
    # checkerboards the vertex areas, which wrecks the strong Laplacian used
    # by the curvature-identity residuals.)
    faces = []
    for i in range(m):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            faces += [[v00, v10, v11], [v00, v11, v01]]
    mesh = build_connectivity(positions, np.asarray(faces, dtype=np.int64))

    nv = positions.shape[0]
    shape = np.broadcast_to(np.diag([b / a, -a / b]), (nv, 2, 2)).copy()
    h = (b * b - a * a) / (2.0 * a * b)
    geom = GeometryData(
        positions=positions, normals=normals, frame_e1=e1, frame_e2=e2,
        shape=shape, mean_h=np.full(nv, h), gauss_k=np.zeros(nv),
        norm_a2=np.full(nv, (b / a) ** 2 + (a / b) ** 2), source="analytic",
        normal_convention="principal curvature +b/a along u-circles")
    return mesh, geom


def generate(spec: ZooSpec) -> tuple[SurfaceMesh, GeometryData]:
    """Mesh a zoo surface and attach its exact per-vertex geometry."""
    if spec.kind == "sphere-r3":
        return _generate_sphere_r3(spec)
    if spec.kind == "geodesic-sphere-s3":
        return _generate_geodesic_sphere_s3(spec)
    return _generate_product_torus_s3(spec)


# ---------------------------------------------------------------------------
# Exact reference spectra
# ---------------------------------------------------------------------------

class AnalyticSpectra(NamedTuple):
    """Leading exact eigenvalues, each list nondecreasing with multiplicity."""

    jacobi: np.ndarray
    hodge1: np.ndarray
    laplace0: np.ndarray

    @property
    def jacobi_mean_zero(self) -> np.ndarray:
        """Jacobi spectrum restricted to mean-zero functions: the constant
        ground state (the zero Laplace mode) is removed."""
        return self.jacobi[1:]


def _sphere_series(radius2: float, potential: float, count: int) -> AnalyticSpectra:
    lap, jac, hodge = [], [], []
    ell = 0
    while len(lap) < count or len(hodge) < count:
        lam = ell * (ell + 1) / radius2
        lap += [lam] * (2 * ell + 1)
        jac += [lam - potential] * (2 * ell + 1)
        if ell >= 1:
            hodge += [lam] * (2 * (2 * ell + 1))
        ell += 1
    return AnalyticSpectra(np.array(jac[:count]), np.array(hodge[:count]),
                           np.array(lap[:count]))


def _torus_series(a: float, b: float, potential: float, count: int) -> AnalyticSpectra:
    window = 8
    while True:
        m = np.arange(-window, window + 1)
        mu = (m[:, None] / a) ** 2 + (m[None, :] / b) ** 2
        mu = np.sort(mu.ravel())
        cutoff = ((window + 1) / max(a, b)) ** 2
        complete = mu[mu < cutoff]
        positives = complete[complete > 0.0]
        if complete.size >= count and 2 + 2 * positives.size >= count:
            lap = complete[:count]
            jac = lap - potential
            hodge = np.concatenate([[0.0, 0.0], np.repeat(positives, 2)])[:count]
            return AnalyticSpectra(jac, hodge, lap)
        window *= 2


def analytic_spectra(spec: ZooSpec, count: int) -> AnalyticSpectra:
    """First `count` exact eigenvalues of the Jacobi operator, the Hodge
    Laplacian on 1-forms, and the scalar Laplacian of a zoo surface."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if spec.kind == "sphere-r3":
        r = spec.radius
        return _sphere_series(r * r, 2.0 / (r * r), count)
    if spec.kind == "geodesic-sphere-s3":
        s2 = math.sin(spec.rho) ** 2
        potential = 2.0 / math.tan(spec.rho) ** 2 + 2.0
        return _sphere_series(s2, potential, count)
    a, b = spec.a, spec.b
    return _torus_series(a, b, (b / a) ** 2 + (a / b) ** 2 + 2.0, count)
