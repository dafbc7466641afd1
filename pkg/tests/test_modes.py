"""Shell enumeration: degeneracy counting, ordering, band selection."""

import math
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonext_bec import BoxSpec, DomainError, SizingError, band_shells, enumerate_shells


def brute_counts(dimension, n_max):
    # direct loop over the integer cube, the thing _norm2_counts compresses
    counts = {}
    for vec in product(range(-n_max, n_max + 1), repeat=dimension):
        s = sum(v * v for v in vec)
        counts[s] = counts.get(s, 0) + 1
    return counts


def test_box_derived_quantities():
    box = BoxSpec(dimension=3, side_length=4.0, n_max=6)
    assert box.volume == pytest.approx(64.0)
    assert box.mode_count == 13 ** 3
    assert box.k_spacing == pytest.approx(2.0 * math.pi / 4.0)
    assert not box.below_critical_dimension
    assert BoxSpec(dimension=2, side_length=4.0, n_max=2).below_critical_dimension


def test_box_rejects_bad_inputs():
    with pytest.raises(DomainError):
        BoxSpec(dimension=0, side_length=4.0, n_max=2)
    with pytest.raises(DomainError):
        BoxSpec(dimension=3, side_length=-1.0, n_max=2)
    with pytest.raises(DomainError):
        BoxSpec(dimension=3, side_length=4.0, n_max=-1)
    with pytest.raises(DomainError):
        BoxSpec(dimension=3, side_length=4.0, n_max=2, mass=0.0)


@given(dimension=st.integers(1, 3), n_max=st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_degeneracies_match_brute_force(dimension, n_max):
    box = BoxSpec(dimension=dimension, side_length=2.0, n_max=n_max)
    shells = enumerate_shells(box)
    expected = brute_counts(dimension, n_max)
    assert {sh.norm2: sh.degeneracy for sh in shells} == expected
    assert sum(sh.degeneracy for sh in shells) == (2 * n_max + 1) ** dimension


def test_shells_sorted_and_consistent():
    box = BoxSpec(dimension=3, side_length=5.0, n_max=7)
    shells = enumerate_shells(box)
    assert shells[0].norm2 == 0
    assert shells[0].energy == 0.0
    assert shells[0].degeneracy == 1
    norms = [sh.norm2 for sh in shells]
    assert norms == sorted(norms)
    dk = box.k_spacing
    for sh in shells:
        assert sh.k_norm == pytest.approx(dk * math.sqrt(sh.norm2))
        # energy = |k|^2 / 2m with m = 1
        assert sh.energy == pytest.approx(0.5 * sh.k_norm ** 2)
        assert sum(v * v for v in sh.rep_vector) == sh.norm2


def test_rep_vector_is_lexicographically_smallest():
    box = BoxSpec(dimension=2, side_length=3.0, n_max=3)
    for sh in enumerate_shells(box):
        candidates = [
            vec
            for vec in product(range(-3, 4), repeat=2)
            if sum(v * v for v in vec) == sh.norm2
        ]
        assert tuple(sh.rep_vector) == min(candidates)


def test_mode_cap_enforced():
    box = BoxSpec(dimension=3, side_length=4.0, n_max=40)
    with pytest.raises(SizingError):
        enumerate_shells(box, max_modes=1000)


def test_band_selection_k_norm_and_energy():
    box = BoxSpec(dimension=3, side_length=4.0, n_max=6)
    shells = enumerate_shells(box)
    band = band_shells(shells, 1.7)
    assert band[0].norm2 == 0
    assert all(sh.k_norm < 1.7 for sh in band)
    outside = [sh for sh in shells if sh.k_norm >= 1.7]
    assert all(sh not in band for sh in outside)

    eband = band_shells(shells, 1.3, mode="energy")
    assert all(sh.energy < 1.3 for sh in eband)


def test_band_always_contains_zero_mode():
    box = BoxSpec(dimension=3, side_length=4.0, n_max=6)
    shells = enumerate_shells(box)
    tiny = band_shells(shells, 1e-9)
    assert len(tiny) == 1 and tiny[0].norm2 == 0


def test_band_rejects_bad_arguments():
    box = BoxSpec(dimension=1, side_length=2.0, n_max=2)
    shells = enumerate_shells(box)
    with pytest.raises(DomainError):
        band_shells(shells, 0.0)
    with pytest.raises(DomainError):
        band_shells(shells, 1.0, mode="angular")
