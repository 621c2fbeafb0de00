"""GF(2) helpers for the polar transform G = E^{(x)n}, E = [[1, 0], [1, 1]].

Bit vectors are numpy ``uint8`` arrays of 0/1 in natural index order (no
bit-reversal). Internally the transform packs them into little-endian
``uint64`` words and runs an in-place XOR butterfly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "IndexInfo",
    "index_info",
    "log2_length",
    "pack_bits",
    "unpack_bits",
    "polar_transform",
    "polar_transform_packed",
    "row_weight",
    "row_of_g",
    "generator_matrix",
    "popcount",
]

_WORD = 64
# Lower-half masks for in-word butterfly strides 1, 2, ..., 32.
_LOW_MASKS = {
    1: np.uint64(0x5555555555555555),
    2: np.uint64(0x3333333333333333),
    4: np.uint64(0x0F0F0F0F0F0F0F0F),
    8: np.uint64(0x00FF00FF00FF00FF),
    16: np.uint64(0x0000FFFF0000FFFF),
    32: np.uint64(0x00000000FFFFFFFF),
}


def popcount(i: int) -> int:
    return bin(int(i)).count("1")


@dataclass(frozen=True)
class IndexInfo:
    """Binary expansion of a virtual-channel index ``i`` in ``[0, 2**n)``."""

    index: int
    n: int
    binary_digits: tuple[int, ...]  # b_0 (least significant) first
    popcount: int


def index_info(i: int, n: int) -> IndexInfo:
    _check_index(i, n)
    digits = tuple((i >> j) & 1 for j in range(n))
    return IndexInfo(index=i, n=n, binary_digits=digits, popcount=sum(digits))


def log2_length(length: int) -> int:
    """Return ``n`` with ``length == 2**n``; raise ``ValueError`` otherwise."""
    if length < 1 or length & (length - 1):
        raise ValueError(f"length must be a power of two, got {length}")
    return length.bit_length() - 1


def _check_index(i: int, n: int) -> None:
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if not 0 <= i < (1 << n):
        raise ValueError(f"index {i} out of range for n={n}")


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack the last axis of a 0/1 array into little-endian uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    length = bits.shape[-1]
    n_words = max(1, -(-length // _WORD))
    padded = np.zeros(bits.shape[:-1] + (n_words * _WORD,), dtype=np.uint8)
    padded[..., :length] = bits
    packed = np.packbits(padded, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8")


def unpack_bits(words: np.ndarray, length: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype="<u8")
    as_bytes = words.view(np.uint8)
    return np.unpackbits(as_bytes, axis=-1, bitorder="little")[..., :length].copy()


def polar_transform_packed(words: np.ndarray, n: int) -> np.ndarray:
    """In-place ``x = u G`` on packed words (last axis); returns ``words``."""
    length = 1 << n
    h = 1
    while h < min(length, _WORD):
        words ^= (words >> np.uint64(h)) & _LOW_MASKS[h]
        h <<= 1
    # Strides of a whole word or more: XOR word blocks.
    n_words = words.shape[-1]
    step = 1
    while step < n_words:
        blocks = words.reshape(words.shape[:-1] + (n_words // (2 * step), 2, step))
        blocks[..., 0, :] ^= blocks[..., 1, :]
        step <<= 1
    return words


def polar_transform(u) -> np.ndarray:
    """Return ``x = u G`` over GF(2) for a bit vector (or a 2-D batch of rows).

    ``G`` is an involution, so applying the transform twice is the identity.
    """
    u = np.asarray(u)
    if u.ndim == 0 or u.ndim > 2:
        raise ValueError("expected a 1-D bit vector or a 2-D batch")
    length = u.shape[-1]
    n = log2_length(length)
    if u.size and (u.min() < 0 or u.max() > 1):
        raise ValueError("bit vectors may only contain 0 and 1")
    words = pack_bits(u)
    polar_transform_packed(words, n)
    return unpack_bits(words, length)


def row_weight(i: int, n: int) -> int:
    """Hamming weight of row ``i`` of ``G``: ``2**popcount(i)``."""
    _check_index(i, n)
    return 1 << popcount(i)


def row_of_g(i: int, n: int) -> np.ndarray:
    """Row ``i`` of ``E^{(x)n}``; entry ``j`` is 1 iff the bits of ``j`` are a subset of those of ``i``."""
    _check_index(i, n)
    j = np.arange(1 << n)
    return ((j & ~i) == 0).astype(np.uint8)


def generator_matrix(n: int) -> np.ndarray:
    """Dense ``E^{(x)n}`` built by Kronecker products (small n only)."""
    e = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    g = np.ones((1, 1), dtype=np.uint8)
    for _ in range(n):
        g = np.kron(g, e)
    return g
