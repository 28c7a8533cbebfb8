"""Shared fixtures: the borderline phase pair, the grid corpus, and a
session-scoped cache so the expensive spectral constants are computed once
and reused by the ordering/acceptance tests."""
import numpy as np
import pytest

from ellipthom import microstructure as micro
from ellipthom import spectra
from ellipthom.tensors import make_gutierrez


@pytest.fixture(scope="session")
def gut():
    """The borderline isotropic pair (mu1=1, lam1=1, mu2=2, lam2=-3)."""
    return make_gutierrez(1.0, 1.0, 2.0, -3.0)


def _disk_centers():
    # small triangular-ish lattice, well separated
    return [(0.25, 0.25), (0.75, 0.25), (0.5, 0.75)]


def build_corpus(n=16):
    """The grid corpus used by the ordering/nonnegativity suites:
    laminates theta in {1/4, 1/2}, checkerboard, weak-matrix disks,
    strong-matrix disks, and 3 random-disk seeds."""
    radius = np.sqrt(0.25 / (3 * np.pi))
    grids = {
        "laminate_025": micro.laminate(n, 0.25),
        "laminate_050": micro.laminate(n, 0.5),
        "checkerboard": micro.checkerboard(n),
        "disks_weak_matrix": micro.disks(n, _disk_centers(), radius, strong_inside=True),
        "disks_strong_matrix": micro.disks(n, _disk_centers(), radius, strong_inside=False),
    }
    for seed in range(3):
        grids[f"random_disks_s{seed}"] = micro.random_disks(n, seed, 0.3, 0.01)
    return grids


@pytest.fixture(scope="session")
def corpus(gut):
    return build_corpus(16)


@pytest.fixture(scope="session")
def spectral_cache():
    """Memoized (grid_name, constant) -> value so acceptance tests that
    share grids don't recompute multi-second eigenproblems."""
    return {}


@pytest.fixture(scope="session")
def get_constant(corpus, gut, spectral_cache):
    def get(name, which):
        key = (name, which)
        if key not in spectral_cache:
            grid = corpus[name]
            if which == "lambda6":
                spectral_cache[key] = spectra.lambda6(grid, gut)
            elif which == "lambda4":
                spectral_cache[key] = spectra.lambda4(grid, gut).value
            elif which == "lambda1":
                spectral_cache[key] = spectra.lambda1(grid, gut)[0]
            else:
                raise KeyError(which)
        return spectral_cache[key]

    return get


def homogeneous_grid(n):
    """All-strong cell: the composite degenerates to phase 1 = iso(1,1)."""
    return micro.PixelGrid(n, np.ones((n, n), dtype=bool),
                           provenance={"kind": "homogeneous", "n": n})
