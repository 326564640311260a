"""Shared fixtures: the resonant kicked model, its chart covers, and the
branch sections continued over them.

Everything here is session-scoped and treated as immutable by the tests;
grids are pinned because several frozen regression values (per-arc phase
branches in particular) are only meaningful at a fixed resolution.
"""

import numpy as np
import pytest

from floquetgerbe import (
    KickedTwoLevelModel,
    build_canonical_sections,
    build_circle_atlas,
    canonical_kicked_atlas,
    compute_all_transitions,
)

N_LAMBDA = 512
N_THETA = 1024


@pytest.fixture(scope="session")
def model():
    return KickedTwoLevelModel(omega0=1.0, omega1=1.0)


@pytest.fixture(scope="session")
def atlas():
    return canonical_kicked_atlas()


@pytest.fixture(scope="session")
def sections(model, atlas):
    return build_canonical_sections(
        model, atlas, branch=0, n_lambda=N_LAMBDA, n_theta=N_THETA
    )


@pytest.fixture(scope="session")
def transitions(sections, atlas):
    return compute_all_transitions(sections, atlas)


@pytest.fixture(scope="session")
def wide_atlas():
    """Four wide charts on the double-period circle; every pairwise overlap
    has two connected components, every triple and the quadruple are
    non-empty, so the per-arc structure of the transition data is fully
    exercised."""
    period = 2.0 * 2.0 * np.pi
    ranges = [(k * np.pi, k * np.pi + 3.25 * np.pi) for k in range(4)]
    return build_circle_atlas(period, ranges)


@pytest.fixture(scope="session")
def wide_sections(model, wide_atlas):
    return build_canonical_sections(
        model, wide_atlas, branch=0, n_lambda=N_LAMBDA, n_theta=N_THETA
    )


@pytest.fixture(scope="session")
def wide_transitions(wide_sections, wide_atlas):
    return compute_all_transitions(wide_sections, wide_atlas)


@pytest.fixture(scope="session")
def tables_cache():
    """Chart-table cache shared across holonomy tests; valid only for the
    session `sections` fixture (keyed by chart index)."""
    return {}
