"""The structured nonconvex penalty and its decomposition into weighted l1 balls."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .model import Partition, ValidationError, as_theta

DEFAULT_CAP = 10_000


class CombinatorialExplosionError(ValueError):
    """The weight family is larger than the caller allowed."""


def _check_beta(beta, partition: Partition) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (partition.p,):
        raise ValidationError(f"beta has shape {beta.shape}, expected ({partition.p},)")
    return beta


def rank_increment(partition: Partition, theta) -> np.ndarray:
    """Per-variable weight increment ``theta_g / (|G_g| - 1)`` for its group."""
    theta = as_theta(theta, partition)
    return theta[partition.group_index] / (partition.sizes()[partition.group_index] - 1)


def eval_omega(beta, partition: Partition, theta) -> float:
    """Evaluate the pairwise within-group penalty.

    Each within-group pair contributes ``min(|b_i|,|b_j|)(1+theta) + max(|b_i|,|b_j|)``,
    scaled by ``1/(|G|-1)``. With ``theta = 0`` this is the l1 norm.

    The sum is computed in its sorted form ``canonical_weight(beta) . |beta|``:
    the i-th largest magnitude of a group is the smaller member of i-1 pairs.
    """
    beta = _check_beta(beta, partition)
    return weighted_l1(canonical_weight(beta, partition, theta), beta)


def weighted_l1(weights, beta) -> float:
    """``sum_i s_i |b_i|``, correctly rounded so that the order of terms is irrelevant."""
    return math.fsum(np.asarray(weights, dtype=float) * np.abs(np.asarray(beta, dtype=float)))


def pairwise_omega(beta, partition: Partition, theta) -> float:
    """Direct pairwise evaluation, kept as a cross-check of :func:`eval_omega`."""
    beta = _check_beta(beta, partition)
    theta = as_theta(theta, partition)
    a = np.abs(beta)
    total = 0.0
    for g, members in enumerate(partition.groups):
        v = a[list(members)]
        lo = np.minimum.outer(v, v)
        hi = np.maximum.outer(v, v)
        iu = np.triu_indices(len(members), 1)
        total += float(np.sum(lo[iu] * (1.0 + theta[g]) + hi[iu])) / (len(members) - 1)
    return total


def weights_from_ranks(ranks: np.ndarray, partition: Partition, theta) -> np.ndarray:
    """Weight vector for 0-based within-group ranks (rank 0 = largest magnitude)."""
    return 1.0 + np.asarray(ranks, dtype=float) * rank_increment(partition, theta)


def canonical_ranks(beta, partition: Partition) -> np.ndarray:
    beta = _check_beta(beta, partition)
    ranks = np.empty(partition.p, dtype=int)
    a = np.abs(beta)
    for members in partition.groups:
        order = sorted(members, key=lambda i: (-a[i], i))
        for r, i in enumerate(order):
            ranks[i] = r
    return ranks


def canonical_weight(beta, partition: Partition, theta) -> np.ndarray:
    """The family member minimising ``||diag(s) beta||_1``.

    Magnitudes are sorted in decreasing order within each group, ties by
    ascending index; the largest coefficient gets weight 1.
    """
    return weights_from_ranks(canonical_ranks(beta, partition), partition, theta)


def family_size(partition: Partition) -> int:
    return math.prod(math.factorial(len(g)) for g in partition.groups)


def enumerate_weight_vectors(partition: Partition, theta, cap: int = DEFAULT_CAP,
                             dedup: bool = True) -> np.ndarray:
    """All weight vectors induced by tuples of within-group permutations.

    Returns an array of shape (m, p). Duplicates (from zero thetas) are removed
    unless ``dedup`` is False, in which case m is the full permutation count.
    """
    theta = as_theta(theta, partition)
    count = family_size(partition)
    if count > cap:
        raise CombinatorialExplosionError(
            f"{count} permutation tuples exceed the cap of {cap}")
    inc = rank_increment(partition, theta)
    per_group = []
    for members in partition.groups:
        options = []
        for perm in itertools.permutations(range(len(members))):
            options.append((members, perm))
        per_group.append(options)
    out = np.empty((count, partition.p))
    for row, combo in enumerate(itertools.product(*per_group)):
        ranks = np.empty(partition.p)
        for members, perm in combo:
            ranks[list(members)] = perm
        out[row] = 1.0 + ranks * inc
    if dedup:
        _, idx = np.unique(out, axis=0, return_index=True)
        out = out[np.sort(idx)]
    return out


def ball_membership(beta, partition: Partition, theta, tau: float) -> bool:
    """Whether ``beta`` lies in the penalty ball of radius ``tau``.

    :func:`eval_omega` is rounded the same way as :func:`family_membership`,
    so the two tests agree exactly on the boundary.
    """
    if not tau > 0:
        raise ValidationError("tau must be positive")
    return eval_omega(beta, partition, theta) <= tau


def family_membership(beta, family: np.ndarray, tau: float) -> bool:
    """Membership in the union of weighted l1 balls given by ``family``."""
    return min(weighted_l1(row, beta) for row in family) <= tau
