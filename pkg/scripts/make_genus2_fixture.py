#!/usr/bin/env python3
"""Regenerate tests/fixtures/genus2.off: a closed oriented genus-2 surface.

Marching cubes over an implicit double torus (two tori glued along a neck).
The output is validated through the library's manifold checks; the Euler
characteristic must give genus 2. Deterministic for a fixed grid.

Requires scikit-image (generation only; the shipped OFF is what tests use).
"""

import os
import sys

import numpy as np
from skimage import measure

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cmclab.mesh import build_connectivity, save_mesh  # noqa: E402


def double_torus_level(x, y, z):
    # Tube around the figure-eight curve y^2 = x^2 (1 - x^2):
    # f = (x^2 (1 - x^2) - y^2)^2 + z^2; the 0.01 level set has genus 2.
    poly = x * x * (1.0 - x * x) - y * y
    return poly * poly + z * z


def main() -> int:
    n = 44
    xs = np.linspace(-1.2, 1.2, n)
    ys = np.linspace(-0.7, 0.7, n)
    zs = np.linspace(-0.2, 0.2, n)
    grid = double_torus_level(xs[:, None, None], ys[None, :, None],
                              zs[None, None, :])
    verts, faces, *_ = measure.marching_cubes(grid, level=0.01,
                                              spacing=(xs[1] - xs[0],
                                                       ys[1] - ys[0],
                                                       zs[1] - zs[0]))
    verts += np.array([xs[0], ys[0], zs[0]])
    mesh = build_connectivity(verts, faces)
    if mesh.genus != 2:
        raise SystemExit(f"expected genus 2, got {mesh.genus}")
    out = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures",
                       "genus2.off")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    save_mesh(mesh, out)
    print(f"wrote {out}: V={mesh.num_vertices} E={mesh.num_edges} "
          f"F={mesh.num_faces} genus={mesh.genus}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
