"""cmclab: a numerical laboratory for the stability of constant mean
curvature surfaces in R^3 and S^3.

Discretizes compact CMC surfaces, assembles the Jacobi (stability) operator
and the Hodge Laplacian on 1-forms, builds harmonic-field test functions, and
verifies at desk scale the genus lower bound for the weak stability index and
the Jacobi/Hodge eigenvalue comparison.
"""

from .ambient import (EUCLIDEAN3, SPHERE3, AmbientSpace, GeometryData,
                      fit_geometry, gauss_equation_residual,
                      project_ambient_basis, support_functions)
from .dec import (OperatorSet, TangentField, assemble_operators, divergence,
                  flat, harmonic_basis, rotate90, sharp)
from .eigen import SpectrumResult, rayleigh_quotient, solve_lowest
from .mesh import (MeshError, SurfaceMesh, build_connectivity, genus,
                   integrate_scalar, load_mesh, save_mesh)
from .pipeline import SurfaceBundle, bundle_from_file, bundle_from_spec, run_verification
from .stability import (IndexReport, JacobiOperator, assemble_jacobi,
                        check_identity_aa, check_lapwi, check_mean_zero,
                        find_orthogonal_field, morse_index, test_functions,
                        verify_theorem_esp, verify_theorem_ind, weak_index)
from .zoo import ZooSpec, analytic_spectra, generate

__version__ = "0.1.0"

__all__ = [
    "AmbientSpace", "EUCLIDEAN3", "SPHERE3", "GeometryData", "fit_geometry",
    "gauss_equation_residual", "project_ambient_basis", "support_functions",
    "OperatorSet", "TangentField", "assemble_operators", "divergence", "flat",
    "harmonic_basis", "rotate90", "sharp", "SpectrumResult",
    "rayleigh_quotient", "solve_lowest", "MeshError", "SurfaceMesh",
    "build_connectivity", "genus", "integrate_scalar", "load_mesh",
    "save_mesh", "SurfaceBundle", "bundle_from_file", "bundle_from_spec",
    "run_verification", "IndexReport", "JacobiOperator", "assemble_jacobi",
    "check_identity_aa", "check_lapwi", "check_mean_zero",
    "find_orthogonal_field", "morse_index", "test_functions",
    "verify_theorem_esp", "verify_theorem_ind", "weak_index", "ZooSpec",
    "analytic_spectra", "generate",
]
