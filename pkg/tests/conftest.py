import sys
from pathlib import Path

import numpy as np
import pytest

from hpdg.mesh import DomainSpec, build_structured_mesh, make_mesh

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def unit():
    return DomainSpec()


@pytest.fixture
def holed():
    return DomainSpec(outer=((0.0, 0.0), (1.0, 1.0)), hole=((0.25, 0.25), (0.75, 0.75)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def two_element_mesh():
    """Skewed quadrilateral split in two; two Robin and two Dirichlet edges."""
    verts = [(0.0, 0.0), (1.2, 0.1), (1.0, 1.1), (-0.1, 0.9)]
    tris = [(0, 1, 2), (0, 2, 3)]
    tags = {(0, 1): "R", (1, 2): "D", (2, 3): "R", (0, 3): "D"}
    return make_mesh(verts, tris, edge_tags=tags)


def unit_mesh(nx):
    return build_structured_mesh(DomainSpec(), nx)
