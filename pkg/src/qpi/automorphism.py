"""Monomial-code view of polar-type codes and their affine automorphisms.

Index ``i`` corresponds to the monomial over the variables at the zero bits
of ``i``; row ``i`` of G is the evaluation of that monomial after the shift
``x -> x + 1``, so low-degree monomials are high-weight rows.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import prod
from typing import Iterable, Iterator, Sequence

import numpy as np

from .construction import CodeSpec

__all__ = [
    "index_to_monomial",
    "monomial_to_index",
    "MonomialSet",
    "BlockProfile",
    "is_decreasing_monomial",
    "block_profile",
    "gl2_size",
    "blta_size",
    "compositions",
    "gf2_rank",
    "affine_automorphism_count",
]


def index_to_monomial(i: int, n: int) -> frozenset[int]:
    """Variables of the monomial for index ``i``: the zero-bit positions of ``i``."""
    if not 0 <= i < (1 << n):
        raise ValueError(f"index {i} out of range for n={n}")
    return frozenset(k for k in range(n) if not (i >> k) & 1)


def monomial_to_index(monomial: Iterable[int], n: int) -> int:
    i = (1 << n) - 1
    for k in monomial:
        if not 0 <= k < n:
            raise ValueError(f"variable {k} out of range for n={n}")
        i &= ~(1 << k)
    return i


@dataclass(frozen=True)
class MonomialSet:
    n: int
    monomials: frozenset[frozenset[int]]

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "MonomialSet":
        return cls(n, frozenset(index_to_monomial(i, n) for i in indices))

    @classmethod
    def from_spec(cls, spec: CodeSpec) -> "MonomialSet":
        """Monomials of the classical code with frozen set ``F_Z`` (its information set)."""
        frozen = set(spec.frozen_z)
        return cls.from_indices((i for i in range(spec.N) if i not in frozen), spec.n)

    def indices(self) -> list[int]:
        return sorted(monomial_to_index(m, self.n) for m in self.monomials)

    def __len__(self) -> int:
        return len(self.monomials)

    def permuted(self, perm: Sequence[int]) -> frozenset[frozenset[int]]:
        """Image under the variable relabelling ``k -> perm[k]``."""
        return frozenset(frozenset(perm[k] for k in m) for m in self.monomials)


@dataclass(frozen=True)
class BlockProfile:
    parts: tuple[int, ...]

    def __post_init__(self):
        if not self.parts or any(p < 1 for p in self.parts):
            raise ValueError(f"block sizes must be positive, got {self.parts}")

    @property
    def n(self) -> int:
        return sum(self.parts)

    def __str__(self) -> str:
        return "-".join(str(p) for p in self.parts)

    def block_starts(self) -> list[int]:
        starts, pos = [], 0
        for p in self.parts:
            starts.append(pos)
            pos += p
        return starts


def is_decreasing_monomial(mset: MonomialSet) -> bool:
    """Closure under dropping a variable and under replacing one by a smaller-indexed one."""
    members = mset.monomials
    for m in members:
        for v in m:
            rest = m - {v}
            if rest not in members:
                return False
            for w in range(v):
                if w not in m and (rest | {w}) not in members:
                    return False
    return True


def _swap_preserves(mset: MonomialSet, a: int, b: int) -> bool:
    perm = list(range(mset.n))
    perm[a], perm[b] = b, a
    return mset.permuted(perm) == mset.monomials


def block_profile(mset: MonomialSet) -> BlockProfile:
    """Coarsest split of the variables into consecutive blocks closed under swaps.

    Adjacent transpositions generate every transposition inside a run, so a
    block grows while the swap with its last variable preserves the set.
    """
    if not is_decreasing_monomial(mset):
        raise ValueError("block profile requires a decreasing monomial set")
    parts = []
    size = 1
    for k in range(1, mset.n):
        if _swap_preserves(mset, k - 1, k):
            size += 1
        else:
            parts.append(size)
            size = 1
    parts.append(size)
    return BlockProfile(tuple(parts))


def gl2_size(s: int) -> int:
    """Order of GL(s, 2)."""
    return prod((1 << s) - (1 << j) for j in range(s))


def blta_size(profile: BlockProfile) -> int:
    """Exact order of the block lower-triangular affine group with this profile."""
    n = profile.n
    off_diagonal = (n * n - sum(p * p for p in profile.parts)) // 2
    return (1 << n) * prod(gl2_size(p) for p in profile.parts) * (1 << off_diagonal)


def compositions(n: int) -> Iterator[tuple[int, ...]]:
    """All ordered tuples of positive integers summing to ``n``."""
    for cuts in itertools.product((False, True), repeat=n - 1):
        parts, size = [], 1
        for cut in cuts:
            if cut:
                parts.append(size)
                size = 1
            else:
                size += 1
        parts.append(size)
        yield tuple(parts)


def gf2_rank(rows: np.ndarray) -> int:
    """Rank over GF(2) of a 0/1 matrix with at most 64 columns."""
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.shape[1] > 64:
        raise ValueError("gf2_rank packs rows into 64-bit words")
    weights = np.uint64(1) << np.arange(rows.shape[1], dtype=np.uint64)
    basis: list[int] = []
    for r in rows:
        v = int((r.astype(np.uint64) * weights).sum())
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return len(basis)


def _block_lower_matrices(profile: BlockProfile) -> Iterator[np.ndarray]:
    # Row v of A may use column w iff block(w) <= block(v); A must be invertible.
    n = profile.n
    block = np.repeat(np.arange(len(profile.parts)), profile.parts)
    free = [(v, w) for v in range(n) for w in range(n) if block[w] <= block[v]]
    for bits in itertools.product((0, 1), repeat=len(free)):
        a = np.zeros((n, n), np.uint8)
        for (v, w), bit in zip(free, bits):
            a[v, w] = bit
        if gf2_rank(a) == n:
            yield a


def affine_automorphism_count(mset: MonomialSet, profile: BlockProfile) -> tuple[int, int]:
    """Brute-force check of affine maps ``x -> A x + b`` with block-lower-triangular ``A``.

    Returns ``(preserving, total)``: how many of the maps leave the code
    spanned by the monomial evaluations invariant, out of all such maps.
    Intended for ``n <= 4``.
    """
    n = mset.n
    if profile.n != n:
        raise ValueError("profile and monomial set disagree on n")
    N = 1 << n
    points = np.array([[(x >> k) & 1 for k in range(n)] for x in range(N)], np.uint8)
    gen = np.array([[all(points[x, k] for k in m) for x in range(N)] for m in mset.monomials],
                   np.uint8).reshape(len(mset), N)
    rank = gf2_rank(gen) if len(mset) else 0
    weights = 1 << np.arange(n)
    preserving = total = 0
    for a in _block_lower_matrices(profile):
        images = (points @ a.T) % 2
        for b in range(N):
            shifted = images ^ points[b]
            perm = shifted @ weights
            total += 1
            # the code is invariant iff adding the permuted generators keeps the rank
            if gf2_rank(np.vstack([gen, gen[:, perm]])) == rank:
                preserving += 1
    return preserving, total
