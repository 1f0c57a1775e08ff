"""Jacobi operator, stability indices, coordinate test functions, and the
numerical verifiers for the two spectral comparison statements.

The Jacobi operator of a CMC surface in a space form of curvature c is the
Schroedinger operator (Laplacian minus the potential |A|^2 + 2c). Its weak
form is the stiffness matrix minus the consistent mass weighted by the
potential; eigenproblems run against the consistent P1 mass. (The lumped mass
shifts the exact-zero torus modes to spuriously negative values at practical
resolutions, which breaks integer index counts; the consistent pencil keeps
them on the correct side by two orders of magnitude relative to the counting
guard.)

The Morse index counts negative eigenvalues over all functions; the weak
index counts them over the mean-zero subspace, realized as a single linear
constraint handled exactly by the eigensolver. Counting uses the guard
eps_neg = 1e-6 (|lambda_1| + spectral scale); an eigenvalue inside the guard
band flags the count as ambiguous and both counts are reported.

Test functions: for a tangent field xi, w_i = <E_i, xi> and
wbar_i = <E_i, rot90 xi> for each ambient coordinate direction. Harmonic xi
makes all of them mean-zero and turns them into admissible variation
directions; the verifiers below exercise exactly that machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ambient import (AmbientSpace, GeometryData, ambient_shape_tensor,
                      project_ambient_basis, rotate90_vertex, support_functions)
from .dec import (OperatorSet, TangentField, covariant_gradient_ambient,
                  divergence, rotate90, sharp, vertex_field, weighted_mass)
from .eigen import SpectrumResult, solve_lowest
from .mesh import SurfaceMesh, integrate_scalar


class StabilityError(ValueError):
    """Raised for invalid stability inputs."""


class NonCmcError(StabilityError):
    """The mean curvature spread exceeds the CMC acceptance tolerance."""


@dataclass(frozen=True)
class JacobiOperator:
    """Weak-form Jacobi operator: stiffness minus potential mass, as a
    symmetric pencil against the consistent P1 mass."""

    matrix: sp.csr_matrix
    mass: sp.csr_matrix
    c: int
    mean_h: float
    potential: np.ndarray

    @property
    def lower_bound(self) -> float:
        """Any eigenvalue is >= -max(potential): the stiffness part is PSD."""
        return -float(np.max(self.potential))

    @property
    def num_vertices(self) -> int:
        return self.matrix.shape[0]


def assemble_jacobi(ops: OperatorSet, geom: GeometryData,
                    space: AmbientSpace) -> JacobiOperator:
    """Assemble the Jacobi pencil; refuses geometry that is not CMC within
    tolerance (the weak index is only meaningful for CMC surfaces)."""
    dev = geom.cmc_deviation()
    if dev > geom.cmc_tolerance():
        raise NonCmcError(
            f"mean curvature spread {dev:.3e} exceeds the CMC tolerance "
            f"{geom.cmc_tolerance():.1e} ({geom.source} geometry)")
    q = geom.norm_a2 + 2.0 * space.c
    mq = weighted_mass(ops.mesh, q)
    jw = (ops.L0 - mq).tocsr()
    jw = ((jw + jw.T) * 0.5).tocsr()
    return JacobiOperator(matrix=jw, mass=ops.M0c, c=space.c,
                          mean_h=geom.median_h(), potential=q)


@dataclass(frozen=True)
class IndexCount:
    """Negative-eigenvalue count with its ambiguity diagnostics."""

    count: int
    count_with_boundary: int  # counting eigenvalues in (-eps, +eps) as negative
    ambiguous: bool
    eigenvalues: np.ndarray
    eps_neg: float

    @property
    def is_exact(self) -> bool:
        return self.count == self.count_with_boundary


def _count_negatives(jac: JacobiOperator, constrained: bool, *,
                     seed: int, initial_k: int = 12) -> IndexCount:
    n = jac.num_vertices
    constraints = np.ones(n) if constrained else None
    k = min(initial_k, n - (1 if constrained else 0))
    while True:
        result = solve_lowest(jac.matrix, jac.mass, k, constraints=constraints,
                              lower_bound=jac.lower_bound, seed=seed)
        eps = result.epsilon_negative()
        lam = result.eigenvalues
        # Enough of the spectrum: the window must end safely above zero.
        if lam[-1] > 10.0 * eps or k >= n - (1 if constrained else 0):
            break
        k = min(2 * k, n - (1 if constrained else 0))
    strict = int(np.sum(lam < -eps))
    loose = int(np.sum(lam < eps))
    return IndexCount(count=strict, count_with_boundary=loose,
                      ambiguous=strict != loose, eigenvalues=lam, eps_neg=eps)


def morse_index(jac: JacobiOperator, *, seed: int = 1729) -> IndexCount:
    """Negative Jacobi eigenvalues over all functions."""
    return _count_negatives(jac, constrained=False, seed=seed)


def weak_index(jac: JacobiOperator, *, seed: int = 1729) -> IndexCount:
    """Negative Jacobi eigenvalues over the mean-zero subspace."""
    return _count_negatives(jac, constrained=True, seed=seed)


# ---------------------------------------------------------------------------
# Coordinate test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunctionSet:
    """Per-vertex test functions w_i = <E_i, xi>, wbar_i = <E_i, rot90 xi>."""

    w: np.ndarray          # (3+c, V)
    w_bar: np.ndarray      # (3+c, V)
    xi_vertex: np.ndarray  # (V, 3+c) recovered vertex field

    def all_functions(self) -> np.ndarray:
        """Stacked (2(3+c), V) array, w block first."""
        return np.vstack([self.w, self.w_bar])

    def projection_identity_residual(self) -> float:
        """max over vertices of |sum_i w_i^2 + wbar_i^2 - 2 |xi|^2|."""
        total = np.sum(self.w ** 2, axis=0) + np.sum(self.w_bar ** 2, axis=0)
        xi2 = np.einsum("vd,vd->v", self.xi_vertex, self.xi_vertex)
        return float(np.max(np.abs(total - 2.0 * xi2)))


def test_functions(ops: OperatorSet, geom: GeometryData, space: AmbientSpace,
                   xi: TangentField) -> TestFunctionSet:
    """Pair the vertex-recovered field (and its rotation) with every
    projected coordinate direction."""
    xi_v = vertex_field(ops, geom, space, xi)
    xi_star = rotate90_vertex(geom, xi_v)
    dim = space.ambient_dim
    w = np.empty((dim, geom.num_vertices))
    w_bar = np.empty((dim, geom.num_vertices))
    for i in range(dim):
        e_i = project_ambient_basis(geom, space, i)
        w[i] = np.einsum("vd,vd->v", e_i, xi_v)
        w_bar[i] = np.einsum("vd,vd->v", e_i, xi_star)
    return TestFunctionSet(w=w, w_bar=w_bar, xi_vertex=xi_v)


def check_mean_zero(mesh: SurfaceMesh, ts: TestFunctionSet) -> float:
    """max |integral of w| over all 2(3+c) test functions. For test functions
    of a harmonic field this vanishes up to discretization noise."""
    return max(abs(integrate_scalar(mesh, f)) for f in ts.all_functions())


def mean_zero_tolerance(mesh: SurfaceMesh, ts: TestFunctionSet) -> float:
    """Acceptance bound 1e-6 x area x max |xi|."""
    max_norm = float(np.max(np.linalg.norm(ts.xi_vertex, axis=1)))
    return 1e-6 * mesh.total_area * max(max_norm, 1e-300)


def check_identity_aa(ops: OperatorSet, geom: GeometryData,
                      xi: TangentField) -> float:
    """Trace identity <A xi, xi> + <A rot90 xi, rot90 xi> = 2 H |xi|^2,
    evaluated per face with everything in the same face frame.

    Returns the max violation normalized by (1 + |A|) |xi|^2; with exact
    per-face data this is pure rounding.
    """
    mesh = ops.mesh
    amb = ambient_shape_tensor(geom)          # (V, d, d)
    a_face = amb[mesh.faces].mean(axis=1)     # (F, d, d)
    t = np.stack([ops.face_t1, ops.face_t2], axis=1)
    a2 = np.einsum("fai,fij,fbj->fab", t, a_face, t)  # (F, 2, 2)
    x = np.einsum("fad,fd->fa", t, xi.face_values)    # frame components
    xs = np.stack([-x[:, 1], x[:, 0]], axis=1)        # 90-degree rotation
    h_face = 0.5 * (a2[:, 0, 0] + a2[:, 1, 1])
    norm2 = np.einsum("fa,fa->f", x, x)
    lhs = (np.einsum("fa,fab,fb->f", x, a2, x)
           + np.einsum("fa,fab,fb->f", xs, a2, xs))
    viol = np.abs(lhs - 2.0 * h_face * norm2)
    scale = (1.0 + np.linalg.norm(a2, axis=(1, 2))) * np.maximum(norm2, 1e-300)
    return float(np.max(viol / scale))


# ---------------------------------------------------------------------------
# The Laplacian identity for coordinate test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LapwiResult:
    """Weak residuals of the identity
    Lap(w_i) = (|A|^2 - 4H^2) w_i + 2H <A E_i, xi> - 2 g_i <A, grad xi>
               + 2c f_i div xi + <E_i, Lap xi>
    per field and coordinate direction, in the lumped-mass norm relative to
    |w_i|."""

    residuals: np.ndarray  # (num_fields, 3+c)

    def max_residual(self) -> float:
        return float(np.max(self.residuals))


def check_lapwi(ops: OperatorSet, geom: GeometryData, space: AmbientSpace,
                fields: list[TangentField], harmonic_threshold: float) -> LapwiResult:
    """Evaluate the identity above for harmonic fields. Every right-hand term
    is computed discretely (the last two are small but nonzero for discrete
    harmonic fields, and are kept). Raises StabilityError for non-harmonic
    input, judged by the Rayleigh quotient against `harmonic_threshold`."""
    mesh = ops.mesh
    areas = mesh.vertex_areas
    dim = space.ambient_dim
    amb = ambient_shape_tensor(geom)
    m1_factor = None
    residuals = np.empty((len(fields), dim))

    for fi, xi in enumerate(fields):
        if xi.cochain is None:
            raise StabilityError("lapwi check needs fields carrying their cochain")
        omega = xi.cochain
        norm2 = float(omega @ (ops.M1 @ omega))
        rq = float(omega @ (ops.L1 @ omega)) / norm2 if norm2 > 0.0 else 0.0
        if rq > harmonic_threshold:
            raise StabilityError(
                f"field {fi} is not harmonic: Rayleigh quotient {rq:.3e} "
                f"above threshold {harmonic_threshold:.3e}")

        xi_v = vertex_field(ops, geom, space, xi)
        div_v = divergence(ops, xi)

        # Strong 1-form Laplacian of the cochain, interpolated to vertices.
        if m1_factor is None:
            m1_factor = spla.splu(ops.M1.tocsc())
        lap_omega = m1_factor.solve(np.asarray(ops.L1 @ omega))
        lap_xi_v = vertex_field(ops, geom, space, sharp(ops, lap_omega))

        # Symmetrized covariant gradient, averaged to vertices, contracted
        # with the shape tensor (A is symmetric: only sym grad contributes).
        grad_f = covariant_gradient_ambient(ops, geom, space, xi)
        grad_f = 0.5 * (grad_f + np.transpose(grad_f, (0, 2, 1)))
        grad_v = np.zeros((mesh.num_vertices, dim, dim))
        wsum = np.zeros(mesh.num_vertices)
        for corner in range(3):
            idx = mesh.faces[:, corner]
            np.add.at(grad_v, idx, mesh.face_areas[:, None, None] * grad_f)
            np.add.at(wsum, idx, mesh.face_areas)
        grad_v /= wsum[:, None, None]
        a_dot_grad = np.einsum("vij,vij->v", amb, grad_v)

        for i in range(dim):
            e_i = project_ambient_basis(geom, space, i)
            f_i, g_i = support_functions(geom, space, i)
            w_i = np.einsum("vd,vd->v", e_i, xi_v)
            lhs = (ops.L0 @ w_i) / areas
            ae_xi = np.einsum("vij,vj,vi->v", amb, xi_v, e_i)
            rhs = ((geom.norm_a2 - 4.0 * geom.mean_h ** 2) * w_i
                   + 2.0 * geom.mean_h * ae_xi
                   - 2.0 * g_i * a_dot_grad
                   + 2.0 * space.c * f_i * div_v
                   + np.einsum("vd,vd->v", e_i, lap_xi_v))
            num = math.sqrt(float(areas @ (lhs - rhs) ** 2))
            den = math.sqrt(float(areas @ w_i ** 2))
            residuals[fi, i] = num / max(den, 1e-300)
    return LapwiResult(residuals=residuals)


def minmax_gap(jac: JacobiOperator, mesh: SurfaceMesh, ts: TestFunctionSet) -> float:
    """Difference (sum_i w J w) - (-2 (c + H^2) sum_i w^2) over the full
    test-function set; nonpositive (up to discretization) for harmonic xi."""
    funcs = ts.all_functions()
    quad = sum(float(f @ (jac.matrix @ f)) for f in funcs)
    norm = sum(float(f @ (jac.mass @ f)) for f in funcs)
    return quad - (-2.0 * (jac.c + jac.mean_h ** 2) * norm)


# ---------------------------------------------------------------------------
# The orthogonality system and the theorem verifiers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrthogonalFieldResult:
    """Outcome of the linear system asking all test functions of a combined
    field to be orthogonal to the leading Jacobi eigenfunctions."""

    coefficients: np.ndarray | None
    singular_values: np.ndarray
    residual: float
    rows: int
    cols: int
    null_dimension: int

    @property
    def found(self) -> bool:
        return self.coefficients is not None


def find_orthogonal_field(ops: OperatorSet, geom: GeometryData, space: AmbientSpace,
                          fields: list[TangentField], phis: np.ndarray,
                          *, residual_tol: float = 1e-8) -> OrthogonalFieldResult:
    """Coefficients c with all integrals of w_i(sum_j c_j xi_j) phi_k and
    wbar_i(...) phi_k vanishing.

    phis: (V, alpha-1) leading Jacobi eigenfunctions (alpha = 1 gives an empty
    system and the first basis field). With more basis fields than equations
    a null vector is guaranteed; otherwise returns the no-solution record with
    the smallest singular value.
    """
    mesh = ops.mesh
    m = len(fields)
    if m == 0:
        raise StabilityError("empty basis of fields")
    phis = np.atleast_2d(np.asarray(phis, dtype=float))
    if phis.shape[0] != mesh.num_vertices:
        phis = phis.T
    n_phi = phis.shape[1]
    dim = space.ambient_dim
    rows = 2 * dim * n_phi

    if rows == 0:
        coeff = np.zeros(m)
        coeff[0] = 1.0
        return OrthogonalFieldResult(coefficients=coeff,
                                     singular_values=np.zeros(0), residual=0.0,
                                     rows=0, cols=m, null_dimension=m)

    weighted_phis = phis * mesh.vertex_areas[:, None]  # integrate against area
    constraint = np.empty((rows, m))
    for j, xi in enumerate(fields):
        ts = test_functions(ops, geom, space, xi)
        constraint[:, j] = (ts.all_functions() @ weighted_phis).ravel()

    u, s, vt = np.linalg.svd(constraint)
    null_dim = int(np.sum(s <= max(s[0], 1e-300) * 1e-10)) + max(0, m - rows)
    coeff = vt[-1]
    scale = max(float(np.linalg.norm(constraint)), 1e-300)
    residual = float(np.linalg.norm(constraint @ coeff)) / scale
    if m <= rows and residual > residual_tol:
        return OrthogonalFieldResult(coefficients=None, singular_values=s,
                                     residual=residual, rows=rows, cols=m,
                                     null_dimension=null_dim)
    return OrthogonalFieldResult(coefficients=coeff, singular_values=s,
                                 residual=residual, rows=rows, cols=m,
                                 null_dimension=null_dim)


def combine_fields(fields: list[TangentField], coeff: np.ndarray) -> TangentField:
    """Linear combination of tangent fields (and of their cochains if present)."""
    face = sum(c * f.face_values for c, f in zip(coeff, fields))
    cochain = None
    if all(f.cochain is not None for f in fields):
        cochain = sum(c * f.cochain for c, f in zip(coeff, fields))
    return TangentField(face_values=face, cochain=cochain)


@dataclass(frozen=True)
class EspRecord:
    """One row of the eigenvalue comparison: the alpha-th Jacobi eigenvalue
    against -2(c + H^2) plus the m(alpha)-th Hodge eigenvalue, with
    m(alpha) = 2 (3+c) (alpha-1) + 1 (the smallest admissible rank)."""

    alpha: int
    m_alpha: int
    lambda_jacobi: float
    lambda_hodge: float
    bound: float
    slack: float
    passed: bool


def esp_rank(alpha: int, c: int) -> int:
    return 2 * (3 + c) * (alpha - 1) + 1


def verify_theorem_esp(jacobi_spectrum: np.ndarray, hodge_spectrum: np.ndarray,
                       c: int, mean_h: float, alpha_max: int,
                       *, tol: float = 1e-3) -> list[EspRecord]:
    """Check lambda^J_alpha <= -2(c + H^2) + lambda^Hodge_{m(alpha)} for
    alpha = 1..alpha_max using computed spectra (Jacobi over all functions)."""
    records = []
    need = esp_rank(alpha_max, c)
    if len(hodge_spectrum) < need or len(jacobi_spectrum) < alpha_max:
        raise StabilityError(
            f"need {alpha_max} Jacobi and {need} Hodge eigenvalues, have "
            f"{len(jacobi_spectrum)} and {len(hodge_spectrum)}")
    for alpha in range(1, alpha_max + 1):
        m_alpha = esp_rank(alpha, c)
        lam_j = float(jacobi_spectrum[alpha - 1])
        lam_h = float(hodge_spectrum[m_alpha - 1])
        bound = -2.0 * (c + mean_h ** 2) + lam_h
        slack = bound - lam_j
        records.append(EspRecord(alpha=alpha, m_alpha=m_alpha, lambda_jacobi=lam_j,
                                 lambda_hodge=lam_h, bound=bound, slack=slack,
                                 passed=slack >= -tol))
    return records


@dataclass(frozen=True)
class IndexReport:
    """Genus lower bound on the weak index, with both counts and margins."""

    morse_index: int
    weak_index: int
    genus: int
    c: int
    bound: float
    bound_integer: int
    passed: bool
    weak_ambiguous: bool
    morse_ambiguous: bool
    eps_neg: float
    jacobi_eigenvalues: np.ndarray = dataclass_field(repr=False, default=None)
    jacobi_mean_zero_eigenvalues: np.ndarray = dataclass_field(repr=False, default=None)


def verify_theorem_ind(morse: IndexCount, weak: IndexCount, genus: int,
                       c: int) -> IndexReport:
    """weak_index >= genus / (3 + c); for genus >= 1 also the integer form
    weak_index >= ceil(genus / (3 + c)) (an index is an integer). With an
    ambiguous count, both counts must satisfy the bound."""
    bound = genus / (3 + c)
    bound_int = math.ceil(bound) if genus >= 1 else 0
    counts = {weak.count, weak.count_with_boundary}
    passed = all(w >= bound and w >= bound_int for w in counts)
    return IndexReport(
        morse_index=morse.count, weak_index=weak.count, genus=genus, c=c,
        bound=bound, bound_integer=bound_int, passed=passed,
        weak_ambiguous=weak.ambiguous, morse_ambiguous=morse.ambiguous,
        eps_neg=weak.eps_neg, jacobi_eigenvalues=morse.eigenvalues,
        jacobi_mean_zero_eigenvalues=weak.eigenvalues)


def jacobi_spectrum(jac: JacobiOperator, k: int, *, mean_zero: bool = False,
                    seed: int = 1729) -> SpectrumResult:
    """Lowest k Jacobi eigenpairs, optionally restricted to mean-zero."""
    constraints = np.ones(jac.num_vertices) if mean_zero else None
    return solve_lowest(jac.matrix, jac.mass, k, constraints=constraints,
                        lower_bound=jac.lower_bound, seed=seed)
