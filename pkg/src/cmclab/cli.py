"""Command-line front end.

Subcommands:
  generate          mesh a built-in surface and write OFF/OFF4/OBJ
  spectrum          leading eigenvalues (CSV, optional figure)
  verify            full verification pipeline (JSON report + figures)
  export-operators  assembled operators as Matrix Market files

Exit codes: 0 all requested checks passed, 1 usage or input error,
2 a verification check failed (the report is still written).

The default output directory comes from CMCLAB_OUTDIR (falling back to the
current directory). `--threads` caps BLAS/OpenMP threads; reports are
byte-identical across reruns for a fixed seed at --threads 1 when timings are
suppressed (--no-timings).
"""

from __future__ import annotations

import argparse
import math
import os
import sys

THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class CliError(Exception):
    """Usage or input error (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise CliError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cmclab", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=1729,
                       help="PRNG seed for solver start vectors (default 1729)")
        p.add_argument("--threads", type=int, default=1,
                       help="BLAS/OpenMP thread cap (default 1, deterministic)")
        p.add_argument("--outdir", default=None,
                       help="output directory (default $CMCLAB_OUTDIR or .)")

    def add_surface(p):
        p.add_argument("--surface", choices=["sphere-r3", "geodesic-sphere-s3",
                                             "product-torus-s3"])
        p.add_argument("--radius", type=float, default=1.0,
                       help="sphere-r3 radius (default 1)")
        p.add_argument("--rho", type=float, default=math.pi / 3,
                       help="geodesic-sphere-s3 radius in (0, pi/2)")
        p.add_argument("--a", type=float, default=1.0 / math.sqrt(2.0),
                       help="product-torus-s3 first radius in (0, 1)")
        p.add_argument("--res", default=None,
                       help="resolution: subdivision level, N, or MxN for tori")
        p.add_argument("--mesh", default=None,
                       help="ingest a mesh file (OFF/OFF4/OBJ) instead")

    p_gen = sub.add_parser("generate", help="mesh a surface and write it")
    add_surface(p_gen)
    add_common(p_gen)
    p_gen.add_argument("--out", default=None, help="output mesh file path")

    p_spec = sub.add_parser("spectrum", help="leading eigenvalues as CSV")
    add_surface(p_spec)
    add_common(p_spec)
    p_spec.add_argument("--which", required=True,
                        choices=["jacobi", "jacobi-mean-zero", "hodge1",
                                 "laplace0"])
    p_spec.add_argument("-k", "--count", type=int, default=10)
    p_spec.add_argument("--out", default=None, help="CSV path")
    p_spec.add_argument("--fig", default=None, help="optional eigenvalue plot")

    p_ver = sub.add_parser("verify", help="run the verification pipeline")
    add_surface(p_ver)
    add_common(p_ver)
    p_ver.add_argument("--alpha-max", type=int, default=5)
    p_ver.add_argument("--levels", default=None,
                       help="comma-separated torus grid sizes for the "
                            "refinement study (default 32,64,128)")
    p_ver.add_argument("--out", default=None, help="report JSON path")
    p_ver.add_argument("--no-figures", action="store_true")
    p_ver.add_argument("--no-timings", action="store_true",
                       help="omit wall-clock timings (byte-identical reruns)")

    p_exp = sub.add_parser("export-operators",
                           help="write assembled operators as Matrix Market")
    add_surface(p_exp)
    add_common(p_exp)
    p_exp.add_argument("--prefix", default="", help="filename prefix")
    return parser


def _outdir(args) -> str:
    out = args.outdir or os.environ.get("CMCLAB_OUTDIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _parse_resolution(args):
    if args.res is None:
        # Defaults: ~10k-vertex spheres (subdivision 5), 64 x 64 tori.
        return 5 if args.surface in ("sphere-r3", "geodesic-sphere-s3") else 64
    text = str(args.res).lower()
    try:
        if "x" in text:
            m, n = text.split("x", 1)
            return (int(m), int(n))
        return int(text)
    except ValueError:
        raise CliError(f"cannot parse resolution '{args.res}'") from None


def _make_bundle(args):
    from . import pipeline, zoo

    if args.mesh is not None:
        if args.surface is not None:
            raise CliError("pass either --surface or --mesh, not both")
        return pipeline.bundle_from_file(args.mesh)
    if args.surface is None:
        raise CliError("one of --surface or --mesh is required")
    res = _parse_resolution(args)
    try:
        spec = zoo.ZooSpec(args.surface, res, radius=args.radius, rho=args.rho,
                           a=args.a)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    return pipeline.bundle_from_spec(spec)


def _default_name(bundle, suffix: str) -> str:
    label = bundle.label.replace("(", "_").replace(")", "")
    label = label.replace(", ", "_").replace("=", "").replace(" ", "")
    return f"{label}{suffix}"


def _cmd_generate(args) -> int:
    from . import mesh as mesh_mod

    bundle = _make_bundle(args)
    ext = ".off4" if bundle.mesh.ambient_dim == 4 else ".off"
    out = args.out or os.path.join(_outdir(args), _default_name(bundle, ext))
    mesh_mod.save_mesh(bundle.mesh, out)
    print(f"wrote {out}  (V={bundle.mesh.num_vertices} F={bundle.mesh.num_faces} "
          f"genus={bundle.mesh.genus})")
    return 0


def _cmd_spectrum(args) -> int:
    import numpy as np

    from . import eigen, report, stability

    bundle = _make_bundle(args)
    ops = bundle.ops
    k = args.count
    if args.which in ("jacobi", "jacobi-mean-zero"):
        jac = stability.assemble_jacobi(ops, bundle.geom, bundle.space)
        result = stability.jacobi_spectrum(
            jac, k, mean_zero=args.which == "jacobi-mean-zero", seed=args.seed)
    elif args.which == "hodge1":
        result = eigen.solve_lowest(ops.L1, ops.M1, k, lower_bound=0.0,
                                    seed=args.seed)
    else:
        result = eigen.solve_lowest(ops.L0, ops.M0c, k, lower_bound=0.0,
                                    seed=args.seed)
    out = args.out or os.path.join(
        _outdir(args), _default_name(bundle, f"_{args.which}.csv"))
    report.write_spectrum_csv(result, out)
    print(f"wrote {out}")
    print("eigenvalues:", np.array2string(result.eigenvalues, precision=6))
    if args.fig:
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(4.6, 3.4))
        ax.plot(range(1, k + 1), result.eigenvalues, "o-", ms=4)
        ax.set_xlabel("rank")
        ax.set_ylabel("eigenvalue")
        ax.set_title(f"{args.which} spectrum, {bundle.label}", fontsize=9)
        fig.tight_layout()
        fig.savefig(args.fig, dpi=150)
        print(f"wrote {args.fig}")
    return 0


def _cmd_verify(args) -> int:
    from . import pipeline, report

    bundle = _make_bundle(args)
    levels = None
    if args.levels:
        try:
            levels = tuple(int(t) for t in args.levels.split(","))
        except ValueError:
            raise CliError(f"cannot parse levels '{args.levels}'") from None
    result = pipeline.run_verification(
        bundle, alpha_max=args.alpha_max, lapwi_levels=levels, seed=args.seed,
        include_timings=not args.no_timings)
    outdir = _outdir(args)
    out = args.out or os.path.join(outdir, _default_name(bundle, "_report.json"))
    report.write_report(result, out)
    print(f"wrote {out}")
    if not args.no_figures:
        for path in report.render_report_figures(
                result, os.path.dirname(out) or ".",
                prefix=os.path.splitext(os.path.basename(out))[0] + "_"):
            print(f"wrote {path}")
    for name, entry in [*result["checks"].items(), *result["theorems"].items()]:
        status = "skip" if "skipped" in entry else \
            ("pass" if entry.get("passed") else "FAIL")
        print(f"  [{status}] {name}")
    if result["failures"]:
        print("failed:", ", ".join(result["failures"]))
        return 2
    print("all checks passed")
    return 0


def _cmd_export(args) -> int:
    from . import report

    bundle = _make_bundle(args)
    paths = report.export_operators(bundle.ops, _outdir(args), prefix=args.prefix)
    for path in paths:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        for var in THREAD_ENV_VARS:
            os.environ.setdefault(var, str(max(1, args.threads)))
        handler = {"generate": _cmd_generate, "spectrum": _cmd_spectrum,
                   "verify": _cmd_verify, "export-operators": _cmd_export}
        return handler[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:  # mesh/geometry/input validation
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:  # solver non-convergence
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
