"""Shared fixtures: small boxes and engines reused across test modules.

Everything here is desk-scale (L <= 8) so individual test files stay fast;
the expensive ladders live in test_acceptance.py behind session-scoped
fixtures of their own.
"""

import pytest

from nonext_bec import BoxSpec, ModelParams, PartitionEngine, Variant, enumerate_shells


@pytest.fixture(scope="session")
def box4():
    return BoxSpec(dimension=3, side_length=4.0, n_max=6)


@pytest.fixture(scope="session")
def shells4(box4):
    return enumerate_shells(box4)


@pytest.fixture(scope="session")
def nonext_engine4(box4, shells4):
    params = ModelParams(Variant.NON_EXTENSIVE, beta=0.6037732186507889,
                         mu=0.8, lam=0.5)
    return PartitionEngine(shells4, params, box4.volume, n_max=160)


@pytest.fixture(scope="session")
def mf_engine4(box4, shells4):
    params = ModelParams(Variant.MEAN_FIELD, beta=0.6037732186507889,
                         mu=0.8, lam=0.5)
    return PartitionEngine(shells4, params, box4.volume, n_max=160)
