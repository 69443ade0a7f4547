import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from replasso.geometry import (CombinatorialExplosionError, ball_membership, canonical_weight,
                               pairwise_omega,
                               enumerate_weight_vectors, eval_omega, family_membership)
from replasso.model import Partition, ValidationError

PAIR = Partition([[0, 1]])


def test_omega_examples():
    assert eval_omega([1, -2], PAIR, 0.0) == 3.0
    assert eval_omega([1, -2], PAIR, 2.0) == 5.0
    for theta in (0.0, 1.5, 40.0):
        assert eval_omega([-3.5, 0.0], PAIR, theta) == 3.5


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(2, 4), min_size=1, max_size=3).flatmap(
    lambda sizes: st.tuples(st.just(sizes), st.lists(st.floats(-50, 50), min_size=sum(sizes),
                                                     max_size=sum(sizes)))),
       st.floats(0, 10))
def test_sorted_form_matches_pairwise(case, theta):
    sizes, beta = case
    part = Partition.contiguous(sum(sizes), sizes[0]) if len(set(sizes)) == 1 else Partition(
        [list(range(sum(sizes[:k]), sum(sizes[:k + 1]))) for k in range(len(sizes))])
    assert np.isclose(eval_omega(beta, part, theta), pairwise_omega(beta, part, theta),
                      rtol=1e-12, atol=1e-10)


def test_omega_dimension_mismatch():
    with pytest.raises(ValidationError):
        eval_omega([1.0, 2.0, 3.0], PAIR, 1.0)


def test_canonical_examples():
    assert list(canonical_weight([5, 1], PAIR, 2.0)) == [1, 3]
    assert list(canonical_weight([1, 5], PAIR, 2.0)) == [3, 1]
    assert list(canonical_weight([3, 2, 1], Partition([[0, 1, 2]]), 2.0)) == [1, 2, 3]
    # ties go to the smaller index
    assert list(canonical_weight([2, -2], PAIR, 2.0)) == [1, 3]


def test_family_examples():
    assert enumerate_weight_vectors(PAIR, 2.0).tolist() == [[1, 3], [3, 1]]
    assert enumerate_weight_vectors(PAIR, 0.0).tolist() == [[1, 1]]
    fam = enumerate_weight_vectors(Partition([[0, 1], [2, 3]]), [1.0, 1.0])
    expected = {(1, 2, 1, 2), (1, 2, 2, 1), (2, 1, 1, 2), (2, 1, 2, 1)}
    assert {tuple(r) for r in fam} == expected
    assert len(fam) == 4


def test_family_cap():
    with pytest.raises(CombinatorialExplosionError):
        enumerate_weight_vectors(Partition.contiguous(12, 6), 1.0, cap=1000)


def test_membership_examples():
    assert ball_membership([0, 0], PAIR, 2.0, 1e-9)
    assert ball_membership([1, -2], PAIR, 2.0, 5.0)
    assert not ball_membership([1, -2], PAIR, 2.0, 4.9)
    with pytest.raises(ValidationError):
        ball_membership([1, 0], PAIR, 2.0, 0.0)


@st.composite
def grouped_vectors(draw):
    sizes = draw(st.lists(st.integers(2, 3), min_size=1, max_size=3))
    groups, start = [], 0
    for m in sizes:
        groups.append(list(range(start, start + m)))
        start += m
    part = Partition(groups)
    theta = draw(st.lists(st.floats(0, 10), min_size=len(sizes), max_size=len(sizes)))
    beta = draw(st.lists(st.floats(-100, 100), min_size=start, max_size=start))
    return part, np.array(theta), np.array(beta)


@settings(max_examples=200, deadline=None)
@given(grouped_vectors(), st.floats(0.01, 50))
def test_omega_homogeneous(case, c):
    part, theta, beta = case
    assert np.isclose(eval_omega(c * beta, part, theta), c * eval_omega(beta, part, theta),
                      rtol=1e-12, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(grouped_vectors())
def test_theta_zero_is_l1(case):
    part, _, beta = case
    assert np.isclose(eval_omega(beta, part, 0.0), np.abs(beta).sum(), rtol=1e-13, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(grouped_vectors())
def test_canonical_weight_is_minimal(case):
    part, theta, beta = case
    s = canonical_weight(beta, part, theta)
    a = np.abs(beta)
    fam = enumerate_weight_vectors(part, theta)
    best = float(s @ a)
    assert best <= np.min(fam @ a) + 1e-9 * max(1.0, best)
    assert np.isclose(best, eval_omega(beta, part, theta), rtol=1e-12, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(grouped_vectors(), st.randoms(use_true_random=False))
def test_omega_invariant_to_within_group_permutation(case, rnd):
    part, theta, beta = case
    permuted = beta.copy()
    for g in part.groups:
        order = list(g)
        rnd.shuffle(order)
        permuted[list(g)] = beta[order]
    assert np.isclose(eval_omega(permuted, part, theta), eval_omega(beta, part, theta),
                      rtol=1e-12, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(grouped_vectors(), st.floats(0.5, 1.5))
def test_membership_matches_family(case, ratio):
    part, theta, beta = case
    tau = max(ratio * eval_omega(beta, part, theta), 1e-6)
    fam = enumerate_weight_vectors(part, theta)
    assert ball_membership(beta, part, theta, tau) == family_membership(beta, fam, tau)


def test_family_rows_are_permutation_weights():
    part = Partition([[0, 1, 2]])
    fam = enumerate_weight_vectors(part, 4.0)
    assert len(fam) == 6
    for row in fam:
        assert sorted(row) == [1.0, 3.0, 5.0]
    rows = {tuple(r) for r in fam}
    assert rows == set(itertools.permutations([1.0, 3.0, 5.0]))
