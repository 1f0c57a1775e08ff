"""Independent oracles used to freeze expected values in the tests.

Everything here is deliberately written as plain brute force, separate from
the library code paths it checks: eigenvalue lists come from direct
enumeration, curvature from central finite differences of the parametrization,
and the reference eigensolver from a dense decomposition with an explicit
constraint basis.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from cmclab.ambient import GeometryData
from cmclab.mesh import build_connectivity


def sphere_jacobi_eigenvalues(radius2: float, potential: float, count: int) -> list[float]:
    """Jacobi spectrum of a round sphere: ell(ell+1)/R^2 - potential with
    multiplicity 2 ell + 1, enumerated directly."""
    out: list[float] = []
    ell = 0
    while len(out) < count:
        out.extend([ell * (ell + 1) / radius2 - potential] * (2 * ell + 1))
        ell += 1
    return out[:count]


def sphere_hodge1_eigenvalues(radius2: float, count: int) -> list[float]:
    out: list[float] = []
    ell = 1
    while len(out) < count:
        out.extend([ell * (ell + 1) / radius2] * (2 * (2 * ell + 1)))
        ell += 1
    return out[:count]


def torus_laplace_eigenvalues(a: float, b: float, count: int,
                              window: int = 40) -> list[float]:
    """Flat-torus scalar spectrum (m/a)^2 + (n/b)^2 by naive double loop."""
    vals = []
    for m in range(-window, window + 1):
        for n in range(-window, window + 1):
            vals.append((m / a) ** 2 + (n / b) ** 2)
    vals.sort()
    assert count <= len(vals)
    return vals[:count]


def torus_hodge1_eigenvalues(a: float, b: float, count: int) -> list[float]:
    positives = [v for v in torus_laplace_eigenvalues(a, b, 4 * count) if v > 0]
    doubled = [0.0, 0.0] + [v for v in positives for _ in range(2)]
    return doubled[:count]


def dense_reference_lowest(A, M, k: int, constraints=None):
    """Reference decomposition: explicit null-space reduction + dense eigh."""
    A = np.asarray(A, dtype=float)
    M = np.asarray(M, dtype=float)
    if constraints is not None:
        C = np.atleast_2d(np.asarray(constraints, dtype=float))
        if C.shape[1] != A.shape[0]:
            C = C.T
        Q = scipy.linalg.null_space(C @ M)
        vals = scipy.linalg.eigh(Q.T @ A @ Q, Q.T @ M @ Q, eigvals_only=True)
    else:
        vals = scipy.linalg.eigh(A, M, eigvals_only=True)
    return vals[:k]


def random_pencil(rng: np.random.Generator, n: int):
    """Random symmetric A and well-conditioned SPD M."""
    A = rng.standard_normal((n, n))
    A = 0.5 * (A + A.T)
    B = rng.standard_normal((n, n)) / math.sqrt(n)
    M = B @ B.T + np.eye(n)
    return A, M


# ---------------------------------------------------------------------------
# Finite-difference curvature of parametrized surfaces
# ---------------------------------------------------------------------------

def fd_shape_operator(psi, normal, u: float, v: float, h: float = 1e-5):
    """Shape operator A X = -D_X N by central differences, expressed in the
    orthonormal frame from Gram-Schmidt of (psi_u, psi_v).

    psi, normal: callables (u, v) -> ambient point / unit normal.
    Returns (A 2x2, H, normA2) for the surface at (u, v).
    """
    du = (np.asarray(psi(u + h, v)) - np.asarray(psi(u - h, v))) / (2 * h)
    dv = (np.asarray(psi(u, v + h)) - np.asarray(psi(u, v - h))) / (2 * h)
    e1 = du / np.linalg.norm(du)
    e2p = dv - (dv @ e1) * e1
    e2 = e2p / np.linalg.norm(e2p)

    dn_u = (np.asarray(normal(u + h, v)) - np.asarray(normal(u - h, v))) / (2 * h)
    dn_v = (np.asarray(normal(u, v + h)) - np.asarray(normal(u, v - h))) / (2 * h)

    # Solve D_X N for X = e1, e2 from the parametric derivatives.
    jac_param = np.column_stack([du, dv])        # d psi / d(u, v)
    jac_n = np.column_stack([dn_u, dn_v])        # d N / d(u, v)
    coords, *_ = np.linalg.lstsq(jac_param, np.column_stack([e1, e2]), rcond=None)
    dn_frame = jac_n @ coords                    # D_{e1} N, D_{e2} N columns
    a_mat = -np.column_stack([e1, e2]).T @ dn_frame
    a_mat = 0.5 * (a_mat + a_mat.T)
    h_mean = 0.5 * np.trace(a_mat)
    return a_mat, h_mean, float(np.sum(a_mat * a_mat))


def product_torus_maps(a: float):
    b = math.sqrt(1.0 - a * a)

    def psi(u, v):
        return [a * math.cos(u), a * math.sin(u), b * math.cos(v), b * math.sin(v)]

    def normal(u, v):
        return [-b * math.cos(u), -b * math.sin(u), a * math.cos(v), a * math.sin(v)]

    return psi, normal


def geodesic_sphere_maps(rho: float):
    def omega(u, v):
        return [math.sin(u) * math.cos(v), math.sin(u) * math.sin(v), math.cos(u)]

    def psi(u, v):
        w = omega(u, v)
        return [math.sin(rho) * w[0], math.sin(rho) * w[1],
                math.sin(rho) * w[2], math.cos(rho)]

    def normal(u, v):
        w = omega(u, v)
        return [-math.cos(rho) * w[0], -math.cos(rho) * w[1],
                -math.cos(rho) * w[2], math.sin(rho)]

    return psi, normal


# ---------------------------------------------------------------------------
# Perturbed product-torus meshes (irregular but still exactly on the surface)
# ---------------------------------------------------------------------------

def perturbed_torus(m: int, n: int, a: float, amplitude: float = 0.2):
    """Product torus sampled on a smoothly distorted parameter grid.

    The distortion is a fixed smooth displacement field scaled with the grid
    spacing, so the mesh family refines consistently while breaking the exact
    lattice symmetry of the uniform grid. Geometry stays analytic (evaluated
    at the perturbed parameters).
    """
    b = math.sqrt(1.0 - a * a)
    ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    u0 = 2.0 * math.pi * ii.ravel() / m
    v0 = 2.0 * math.pi * jj.ravel() / n
    uu = u0 + amplitude * (2.0 * math.pi / m) * np.sin(u0 + 2.0 * v0)
    vv = v0 + amplitude * (2.0 * math.pi / n) * np.cos(2.0 * u0 - v0)

    positions = np.column_stack([a * np.cos(uu), a * np.sin(uu),
                                 b * np.cos(vv), b * np.sin(vv)])
    normals = np.column_stack([-b * np.cos(uu), -b * np.sin(uu),
                               a * np.cos(vv), a * np.sin(vv)])
    e1 = np.column_stack([-np.sin(uu), np.cos(uu),
                          np.zeros_like(uu), np.zeros_like(uu)])
    e2 = np.column_stack([np.zeros_like(vv), np.zeros_like(vv),
                          -np.sin(vv), np.cos(vv)])

    def vid(i, j):
        return (i % m) * n + (j % n)

    faces = []
    for i in range(m):
        for j in range(n):
            faces += [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)],
                      [vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]]
    mesh = build_connectivity(positions, np.asarray(faces, dtype=np.int64))

    nv = positions.shape[0]
    shape = np.broadcast_to(np.diag([b / a, -a / b]), (nv, 2, 2)).copy()
    geom = GeometryData(
        positions=positions, normals=normals, frame_e1=e1, frame_e2=e2,
        shape=shape, mean_h=np.full(nv, (b * b - a * a) / (2 * a * b)),
        gauss_k=np.zeros(nv), norm_a2=np.full(nv, (b / a) ** 2 + (a / b) ** 2),
        source="analytic", normal_convention="principal curvature +b/a along u")
    return mesh, geom
