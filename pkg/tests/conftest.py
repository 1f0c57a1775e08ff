"""Shared fixtures: each Study wraps one surface and caches the expensive
solves (spectra, harmonic bases, indices) so the suite assembles and solves
every mesh only once per session."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import pytest

from cmclab import dec, eigen, stability, zoo
from cmclab.mesh import load_mesh
from cmclab.pipeline import SurfaceBundle, bundle_from_spec

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


@dataclass
class Study:
    bundle: SurfaceBundle
    _cache: dict = field(default_factory=dict)

    @property
    def mesh(self):
        return self.bundle.mesh

    @property
    def geom(self):
        return self.bundle.geom

    @property
    def ops(self):
        return self.bundle.ops

    @property
    def space(self):
        return self.bundle.space

    @property
    def spec(self):
        return self.bundle.spec

    def jacobi(self) -> stability.JacobiOperator:
        if "jacobi" not in self._cache:
            self._cache["jacobi"] = stability.assemble_jacobi(
                self.ops, self.geom, self.space)
        return self._cache["jacobi"]

    def morse(self) -> stability.IndexCount:
        if "morse" not in self._cache:
            self._cache["morse"] = stability.morse_index(self.jacobi())
        return self._cache["morse"]

    def weak(self) -> stability.IndexCount:
        if "weak" not in self._cache:
            self._cache["weak"] = stability.weak_index(self.jacobi())
        return self._cache["weak"]

    def jacobi_full(self, k: int) -> eigen.SpectrumResult:
        cached = self._cache.get("jacobi_full")
        if cached is None or len(cached.eigenvalues) < k:
            cached = stability.jacobi_spectrum(self.jacobi(), k)
            self._cache["jacobi_full"] = cached
        return cached

    def hodge(self, k: int) -> eigen.SpectrumResult:
        cached = self._cache.get("hodge")
        if cached is None or len(cached.eigenvalues) < k:
            cached = eigen.solve_lowest(self.ops.L1, self.ops.M1, k,
                                        lower_bound=0.0)
            self._cache["hodge"] = cached
        return cached

    def harmonic_fields(self) -> list[dec.TangentField]:
        if "harmonic_fields" not in self._cache:
            basis = dec.harmonic_basis(self.ops)
            self._cache["harmonic_fields"] = [dec.sharp(self.ops, w)
                                              for w in basis]
        return self._cache["harmonic_fields"]

    def harmonic_threshold(self) -> float:
        lam = self.hodge(2 * self.mesh.genus + 3).eigenvalues
        return dec.HARMONIC_GAP_FACTOR * float(lam[2 * self.mesh.genus])


def _study(spec: zoo.ZooSpec) -> Study:
    return Study(bundle_from_spec(spec))


@pytest.fixture(scope="session")
def clifford64() -> Study:
    return _study(zoo.ZooSpec("product-torus-s3", 64))


@pytest.fixture(scope="session")
def torus06_64() -> Study:
    return _study(zoo.ZooSpec("product-torus-s3", 64, a=0.6))


@pytest.fixture(scope="session")
def clifford24() -> Study:
    """Small torus for cheap unit tests."""
    return _study(zoo.ZooSpec("product-torus-s3", 24))


@pytest.fixture(scope="session")
def sphere4() -> Study:
    return _study(zoo.ZooSpec("sphere-r3", 4))


@pytest.fixture(scope="session")
def sphere5() -> Study:
    return _study(zoo.ZooSpec("sphere-r3", 5))


@pytest.fixture(scope="session")
def geodesic5() -> Study:
    return _study(zoo.ZooSpec("geodesic-sphere-s3", 5))


@pytest.fixture(scope="session")
def geodesic4() -> Study:
    return _study(zoo.ZooSpec("geodesic-sphere-s3", 4))


@pytest.fixture(scope="session")
def genus2_mesh():
    return load_mesh(os.path.join(FIXTURE_DIR, "genus2.off"))


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
