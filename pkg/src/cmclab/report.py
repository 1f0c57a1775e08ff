"""Report serialization: schema-validated JSON, spectrum CSV, Matrix Market
operator export, and the report figures.

JSON output is deterministic (sorted keys, default float repr); figures are
rendered with the Agg backend straight to files.
"""

from __future__ import annotations

import csv
import importlib.resources
import json
import os

import numpy as np
import scipy.io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .dec import OperatorSet  # noqa: E402
from .eigen import SpectrumResult  # noqa: E402


def load_schema() -> dict:
    ref = importlib.resources.files("cmclab") / "schema/verification_report.schema.json"
    return json.loads(ref.read_text())


def validate_report(report: dict) -> None:
    """Validate against the shipped schema (raises jsonschema.ValidationError)."""
    import jsonschema

    jsonschema.validate(report, load_schema())


def write_report(report: dict, path: str) -> None:
    validate_report(report)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def multiplicity_groups(eigenvalues: np.ndarray, rel_tol: float = 2e-3) -> np.ndarray:
    """Group ids for near-degenerate eigenvalue clusters (ascending input)."""
    lam = np.asarray(eigenvalues, dtype=float)
    scale = max(float(np.max(np.abs(lam))), 1e-300) if lam.size else 1.0
    groups = np.zeros(lam.size, dtype=int)
    for i in range(1, lam.size):
        gap_tol = rel_tol * max(abs(lam[i]), abs(lam[i - 1]), 1e-3 * scale)
        groups[i] = groups[i - 1] + (1 if lam[i] - lam[i - 1] > gap_tol else 0)
    return groups


def write_spectrum_csv(result: SpectrumResult, path: str) -> None:
    groups = multiplicity_groups(result.eigenvalues)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "eigenvalue", "residual", "multiplicity_group"])
        for i, (lam, res, grp) in enumerate(
                zip(result.eigenvalues, result.residuals, groups), start=1):
            writer.writerow([i, repr(float(lam)), repr(float(res)), grp])


def export_operators(ops: OperatorSet, outdir: str, prefix: str = "") -> list[str]:
    """Write every assembled operator as a Matrix Market file."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for name, matrix in ops.named_matrices().items():
        path = os.path.join(outdir, f"{prefix}{name}.mtx")
        scipy.io.mmwrite(path, matrix.tocoo())
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

def _spectra_axes(ax, report: dict) -> None:
    spectra = report["spectra"]
    comparison = spectra.get("analytic_comparison", {})
    jac = spectra.get("jacobi", {})
    if "eigenvalues" in jac:
        lam = jac["eigenvalues"]
        ax.plot(range(1, len(lam) + 1), lam, "o", ms=4, label="Jacobi (computed)")
        exact = comparison.get("analytic_jacobi")
        if exact:
            ax.plot(range(1, len(exact) + 1), exact, "k+", ms=8,
                    label="Jacobi (exact)")
    hodge = spectra.get("hodge1", {})
    if "eigenvalues" in hodge:
        lam = hodge["eigenvalues"]
        ax.plot(range(1, len(lam) + 1), lam, "s", ms=3,
                label="Hodge 1-forms (computed)")
        exact = comparison.get("analytic_hodge1")
        if exact:
            ax.plot(range(1, len(exact) + 1), exact, "kx", ms=6,
                    label="Hodge (exact)")
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("eigenvalue rank")
    ax.set_ylabel("eigenvalue")
    ax.legend(fontsize=8)
    ax.set_title("spectra")


def _comparison_axes(ax, report: dict) -> None:
    rec = report["theorems"].get("eigenvalue_comparison", {}).get("records")
    if not rec:
        ax.axis("off")
        ax.text(0.5, 0.5, "comparison skipped", ha="center", va="center")
        return
    alphas = [r["alpha"] for r in rec]
    ax.plot(alphas, [r["lambda_jacobi"] for r in rec], "o-",
            label=r"$\lambda_\alpha$ (Jacobi)")
    ax.plot(alphas, [r["bound"] for r in rec], "s--",
            label=r"$-2(c+H^2)+\lambda_{m(\alpha)}$ (bound)")
    ax.set_xticks(alphas)
    ax.set_xlabel(r"$\alpha$")
    ax.set_ylabel("eigenvalue")
    ax.legend(fontsize=8)
    ax.set_title("eigenvalue comparison")


def render_report_figures(report: dict, outdir: str, prefix: str = "") -> list[str]:
    """Render the spectrum/bound figure and, when the refinement study ran,
    the residual-convergence figure. Returns the written paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []

    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    _spectra_axes(axes[0], report)
    _comparison_axes(axes[1], report)
    fig.suptitle(report["surface"]["label"], fontsize=10)
    fig.tight_layout()
    path = os.path.join(outdir, f"{prefix}spectra.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    lapwi = report["checks"].get("lapwi")
    if lapwi and lapwi.get("levels"):
        res = np.array([row["resolution"] for row in lapwi["levels"]], dtype=float)
        val = np.array([max(row["max_residual"], 1e-17)
                        for row in lapwi["levels"]])
        fig, ax = plt.subplots(figsize=(4.6, 3.6))
        ax.loglog(res, val, "o-", label="max residual")
        anchor = max(val[0], lapwi["floor"])
        ax.loglog(res, anchor * (res[0] / res), ":", color="0.5", label="order 1")
        ax.axhline(lapwi["floor"], color="0.7", lw=0.8, label="rounding floor")
        ax.set_xlabel("grid resolution")
        ax.set_ylabel("identity residual")
        ax.legend(fontsize=8)
        ax.set_title("Laplacian identity residual vs resolution")
        fig.tight_layout()
        path = os.path.join(outdir, f"{prefix}lapwi_convergence.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths
