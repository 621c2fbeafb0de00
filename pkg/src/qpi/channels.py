"""Binary-input symmetric channels, Arikan splitting and degrading merge.

A symmetric channel is stored by its *conjugate pairs*: every half-symbol
``(a, b)`` with ``a >= b`` stands for the two outputs ``y`` with
``W(y|0), W(y|1) = a, b`` and its conjugate ``y'`` with ``b, a``. A
self-conjugate output ``(c, c)`` is the half-symbol ``(c/2, c/2)``. With this
layout ``sum(a + b) == 1``, the ML error probability is ``sum(b)`` and the
Bhattacharyya parameter is ``2 * sum(sqrt(a * b))``.

The construction follows the usual Tal-Vardy recipe, degrading half only:
split, then greedily merge LR-adjacent half-symbols with the smallest
symmetric-capacity loss until at most ``mu`` outputs remain.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from numba import njit

__all__ = [
    "DiscreteChannel",
    "PauliNoise",
    "ChannelParams",
    "MAX_OUTPUTS",
    "DEFAULT_MU",
    "make_bsc",
    "make_bec",
    "induced_bitflip",
    "induced_phaseflip",
    "arikan_minus",
    "arikan_plus",
    "degrading_merge",
    "error_probability",
    "bhattacharyya",
    "virtual_channel_params",
    "bsc_virtual_channel_params",
    "bec_bhattacharyya_exact",
]

DEFAULT_MU = 256
# Hard cap on the full output alphabet of an unmerged split.
MAX_OUTPUTS = 1 << 22
_NORM_TOL = 1e-12


class ResourceError(RuntimeError):
    """Raised when a split would exceed :data:`MAX_OUTPUTS` outputs."""


class DiscreteChannel:
    """Binary-input symmetric DMC held as conjugate-pair half-symbols."""

    __slots__ = ("a", "b", "description")

    def __init__(self, a, b, description: str = "", *, check: bool = True):
        a = np.ascontiguousarray(a, dtype=np.float64)
        b = np.ascontiguousarray(b, dtype=np.float64)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("half-symbol arrays must be 1-D and of equal length")
        if check:
            if np.any(a < 0) or np.any(b < 0):
                raise ValueError("likelihoods must be non-negative")
            total = float(a.sum() + b.sum())
            if abs(total - 1.0) > _NORM_TOL:
                raise ValueError(f"likelihoods sum to {total}, expected 1")
            swap = b > a
            if np.any(swap):
                a, b = np.where(swap, b, a), np.where(swap, a, b)
        self.a = a
        self.b = b
        self.description = description

    @classmethod
    def from_outputs(cls, outputs: Sequence[tuple[float, float]], description: str = "") -> "DiscreteChannel":
        """Build from full ``(W(y|0), W(y|1))`` pairs; the list must be symmetric."""
        w = np.asarray(outputs, dtype=np.float64).reshape(-1, 2)
        if np.any(w < 0):
            raise ValueError("likelihoods must be non-negative")
        for col in (0, 1):
            if abs(w[:, col].sum() - 1.0) > _NORM_TOL:
                raise ValueError("each input row of the channel must sum to 1")
        tie = np.isclose(w[:, 0], w[:, 1], rtol=0, atol=1e-15)
        up = w[(w[:, 0] > w[:, 1]) & ~tie]
        down = w[(w[:, 0] < w[:, 1]) & ~tie][:, ::-1]
        up = up[np.lexsort((up[:, 1], up[:, 0]))]
        down = down[np.lexsort((down[:, 1], down[:, 0]))]
        if up.shape != down.shape or not np.allclose(up, down, rtol=0, atol=1e-12):
            raise ValueError("channel outputs are not closed under conjugation")
        half_tie = w[tie] / 2.0
        a = np.concatenate([up[:, 0], half_tie[:, 0]])
        b = np.concatenate([up[:, 1], half_tie[:, 1]])
        return cls(a, b, description)

    @property
    def outputs(self) -> list[tuple[float, float]]:
        """Full output list, each conjugate pair adjacent."""
        out: list[tuple[float, float]] = []
        for a, b in zip(self.a.tolist(), self.b.tolist()):
            if a == b:
                out.append((2 * a, 2 * b))
            else:
                out.append((a, b))
                out.append((b, a))
        return out

    @property
    def num_outputs(self) -> int:
        ties = int(np.count_nonzero(self.a == self.b))
        return 2 * (self.a.size - ties) + ties

    def __len__(self) -> int:
        return self.num_outputs

    def __repr__(self) -> str:
        return f"DiscreteChannel({self.description or 'anonymous'}, outputs={self.num_outputs})"


@dataclass(frozen=True)
class PauliNoise:
    """Pauli channel probabilities; ``q`` is set for the equal-XZ model."""

    p_x: float
    p_y: float
    p_z: float
    q: Optional[float] = None

    def __post_init__(self):
        for name in ("p_x", "p_y", "p_z"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.p_x + self.p_y + self.p_z > 1 + 1e-15:
            raise ValueError("Pauli probabilities sum above 1")

    @classmethod
    def equal_xz(cls, q: float) -> "PauliNoise":
        """Independent X and Z flips, each with probability ``q``."""
        if not 0 <= q <= 1:
            raise ValueError(f"q must lie in [0, 1], got {q}")
        return cls(p_x=q - q * q, p_y=q * q, p_z=q - q * q, q=q)

    @property
    def p_i(self) -> float:
        return 1.0 - self.p_x - self.p_y - self.p_z


@dataclass
class ChannelParams:
    """Per-index virtual channel estimates in natural index order."""

    p_err: np.ndarray
    bhattacharyya: Optional[np.ndarray] = None
    mu: Optional[int] = None
    source: str = ""
    alpha: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.p_err)

    def to_csv(self, target) -> None:
        """Write to a path or an open text stream."""
        if hasattr(target, "write"):
            self._write_csv(target)
            return
        with open(target, "w", newline="") as fh:
            self._write_csv(fh)

    def _write_csv(self, fh) -> None:
        fh.write("#schema: qpi-channel/1\n")
        writer = csv.writer(fh, lineterminator="\n")
        header = ["index", "p_err"]
        if self.bhattacharyya is not None:
            header.append("bhattacharyya")
        writer.writerow(header)
        for i, pe in enumerate(self.p_err):
            row = [i, repr(float(pe))]
            if self.bhattacharyya is not None:
                row.append(repr(float(self.bhattacharyya[i])))
            writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "ChannelParams":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
        header, body = rows[0], rows[1:]
        p_err = np.array([float(r[header.index("p_err")]) for r in body])
        z = None
        if "bhattacharyya" in header:
            z = np.array([float(r[header.index("bhattacharyya")]) for r in body])
        return cls(p_err=p_err, bhattacharyya=z)


def make_bsc(p: float) -> DiscreteChannel:
    if not 0 <= p <= 0.5:
        raise ValueError(f"BSC crossover must lie in [0, 1/2], got {p}")
    return DiscreteChannel([1.0 - p], [p], f"BSC({p:g})")


def make_bec(e: float) -> DiscreteChannel:
    if not 0 <= e <= 1:
        raise ValueError(f"BEC erasure probability must lie in [0, 1], got {e}")
    a, b = [], []
    if e < 1:
        a.append(1.0 - e)
        b.append(0.0)
    if e > 0:
        a.append(e / 2)
        b.append(e / 2)
    return DiscreteChannel(a, b, f"BEC({e:g})")


def induced_bitflip(noise: PauliNoise, alpha: float = 1.0) -> DiscreteChannel:
    """Bit-flip channel ``BSC(alpha * (p_X + p_Y))``."""
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return make_bsc(alpha * (noise.p_x + noise.p_y))


def induced_phaseflip(noise: PauliNoise, alpha: float = 1.0) -> DiscreteChannel:
    """Flagged phase-flip channel: a mixture of two BSCs with the flag as output.

    Flag 1 (an X error occurred, prob ``p_X + p_Y``) sees
    ``BSC(alpha * p_Y / (p_X + p_Y))``; flag 0 sees
    ``BSC(alpha * p_Z / (p_I + p_Z))``. A branch of probability zero is dropped.
    """
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    a, b = [], []
    for weight, flips in ((noise.p_x + noise.p_y, noise.p_y), (noise.p_i + noise.p_z, noise.p_z)):
        if weight <= 0:
            continue
        c = alpha * flips / weight
        if c > 0.5:
            raise ValueError(f"branch crossover {c} exceeds 1/2")
        a.append(weight * (1.0 - c))
        b.append(weight * c)
    return DiscreteChannel(a, b, f"flagged-phase-flip(alpha={alpha:g})")


def error_probability(w: DiscreteChannel) -> float:
    """ML error probability ``1/2 sum_y min(W(y|0), W(y|1))``; ties count half."""
    return float(w.b.sum())


def bhattacharyya(w: DiscreteChannel) -> float:
    return float(2.0 * np.sqrt(w.a * w.b).sum())


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _minus_kernel(a, b):
    # (j, m) and (m, j) give the same output; fold them.
    k = a.size
    size = k * (k + 1) // 2
    out_a = np.empty(size)
    out_b = np.empty(size)
    t = 0
    for j in range(k):
        out_a[t] = a[j] * a[j] + b[j] * b[j]
        out_b[t] = 2.0 * a[j] * b[j]
        t += 1
        for m in range(j + 1, k):
            out_a[t] = 2.0 * (a[j] * a[m] + b[j] * b[m])
            out_b[t] = 2.0 * (a[j] * b[m] + b[j] * a[m])
            t += 1
    return out_a, out_b


@njit(cache=True)
def _plus_kernel(a, b):
    # Both half-symbols of (j, m) are invariant under j <-> m; fold them.
    k = a.size
    size = k * (k + 1)
    out_a = np.empty(size)
    out_b = np.empty(size)
    t = 0
    for j in range(k):
        for m in range(j, k):
            c = 1.0 if m == j else 2.0
            out_a[t] = c * a[j] * a[m]
            out_b[t] = c * b[j] * b[m]
            x = b[j] * a[m]
            y = a[j] * b[m]
            if x < y:
                x, y = y, x
            out_a[t + 1] = c * x
            out_b[t + 1] = c * y
            t += 2
    return out_a, out_b


@njit(cache=True)
def _potential(a, b):
    # Symmetric capacity of a half-symbol is (a + b) log 2 - P(a, b) (nats).
    # Written with r = b / a so nearly-noiseless symbols keep relative accuracy;
    # merge losses are differences of P on the scale of b, not of a.
    if a <= 0.0:
        return (a + b) * math.log(2.0)
    r = b / a
    p = (a + b) * math.log1p(r)
    if b > 0.0:
        p -= b * math.log(r)
    return p


@njit(cache=True)
def _heap_push(keys, idx, stamp, size, key, i, s):
    pos = size
    keys[pos] = key
    idx[pos] = i
    stamp[pos] = s
    while pos > 0:
        parent = (pos - 1) >> 1
        if keys[parent] < keys[pos] or (keys[parent] == keys[pos] and idx[parent] <= idx[pos]):
            break
        keys[parent], keys[pos] = keys[pos], keys[parent]
        idx[parent], idx[pos] = idx[pos], idx[parent]
        stamp[parent], stamp[pos] = stamp[pos], stamp[parent]
        pos = parent
    return size + 1


@njit(cache=True)
def _heap_pop(keys, idx, stamp, size):
    key, i, s = keys[0], idx[0], stamp[0]
    size -= 1
    keys[0] = keys[size]
    idx[0] = idx[size]
    stamp[0] = stamp[size]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= size:
            break
        child = left
        right = left + 1
        if right < size and (keys[right] < keys[left] or (keys[right] == keys[left] and idx[right] < idx[left])):
            child = right
        if keys[pos] < keys[child] or (keys[pos] == keys[child] and idx[pos] <= idx[child]):
            break
        keys[child], keys[pos] = keys[pos], keys[child]
        idx[child], idx[pos] = idx[pos], idx[child]
        stamp[child], stamp[pos] = stamp[pos], stamp[child]
        pos = child
    return key, i, s, size


@njit(cache=True)
def _merge_kernel(a_in, b_in, max_half):
    # Drop empty symbols, sort by b/(a+b) (LR descending), fold equal LRs.
    keep = (a_in + b_in) > 0
    a0 = a_in[keep]
    b0 = b_in[keep]
    key = b0 / (a0 + b0)
    order = np.argsort(key, kind="mergesort")
    m0 = order.size
    a = np.empty(m0)
    b = np.empty(m0)
    m = 0
    last = -1.0
    for t in range(m0):
        o = order[t]
        if m > 0 and key[o] == last:
            a[m - 1] += a0[o]
            b[m - 1] += b0[o]
        else:
            a[m] = a0[o]
            b[m] = b0[o]
            last = key[o]
            m += 1
    if m <= max_half:
        return a[:m].copy(), b[:m].copy()

    prev = np.empty(m, np.int64)
    nxt = np.empty(m, np.int64)
    alive = np.ones(m, np.bool_)
    version = np.zeros(m, np.int64)
    cap = 3 * m + 8
    hkeys = np.empty(cap)
    hidx = np.empty(cap, np.int64)
    hstamp = np.empty(cap, np.int64)
    size = 0
    for i in range(m):
        prev[i] = i - 1
        nxt[i] = i + 1 if i + 1 < m else -1
    pot = np.empty(m)
    for i in range(m):
        pot[i] = _potential(a[i], b[i])
    for i in range(m - 1):
        loss = _potential(a[i] + a[i + 1], b[i] + b[i + 1]) - pot[i] - pot[i + 1]
        size = _heap_push(hkeys, hidx, hstamp, size, loss, i, 0)
    count = m
    while count > max_half and size > 0:
        _, i, s, size = _heap_pop(hkeys, hidx, hstamp, size)
        if not alive[i] or s != version[i] or nxt[i] < 0:
            continue
        j = nxt[i]
        a[i] += a[j]
        b[i] += b[j]
        pot[i] = _potential(a[i], b[i])
        alive[j] = False
        nxt[i] = nxt[j]
        if nxt[j] >= 0:
            prev[nxt[j]] = i
        count -= 1
        version[i] += 1
        if nxt[i] >= 0:
            k = nxt[i]
            loss = _potential(a[i] + a[k], b[i] + b[k]) - pot[i] - pot[k]
            size = _heap_push(hkeys, hidx, hstamp, size, loss, i, version[i])
        p = prev[i]
        if p >= 0:
            version[p] += 1
            loss = _potential(a[p] + a[i], b[p] + b[i]) - pot[p] - pot[i]
            size = _heap_push(hkeys, hidx, hstamp, size, loss, p, version[p])
    out_a = np.empty(count)
    out_b = np.empty(count)
    t = 0
    for i in range(m):
        if alive[i]:
            out_a[t] = a[i]
            out_b[t] = b[i]
            t += 1
    return out_a, out_b


# ---------------------------------------------------------------------------
# channel transforms
# ---------------------------------------------------------------------------


def _check_split_size(w: DiscreteChannel, factor: int) -> None:
    k = w.a.size
    if 2 * factor * k * k > MAX_OUTPUTS:
        raise ResourceError(
            f"split of a channel with {w.num_outputs} outputs exceeds the cap of {MAX_OUTPUTS}; "
            "apply degrading_merge first"
        )


def arikan_minus(w: DiscreteChannel) -> DiscreteChannel:
    """``W-(y1 y2 | u1) = 1/2 sum_u2 W(y1 | u1 ^ u2) W(y2 | u2)``."""
    _check_split_size(w, 1)
    a, b = _minus_kernel(w.a, w.b)
    return DiscreteChannel(a, b, f"({w.description})-", check=False)


def arikan_plus(w: DiscreteChannel) -> DiscreteChannel:
    """``W+(y1 y2 u1 | u2) = 1/2 W(y1 | u1 ^ u2) W(y2 | u2)``."""
    _check_split_size(w, 2)
    a, b = _plus_kernel(w.a, w.b)
    return DiscreteChannel(a, b, f"({w.description})+", check=False)


def degrading_merge(w: DiscreteChannel, mu: int) -> DiscreteChannel:
    """Reduce ``w`` to at most ``mu`` outputs by greedy degrading merges.

    Outputs with equal likelihood ratio are folded first (lossless). The
    result is stochastically degraded with respect to ``w``.
    """
    if mu < 2 or mu % 2:
        raise ValueError(f"mu must be an even integer >= 2, got {mu}")
    if w.num_outputs <= mu:
        return w
    a, b = _merge_kernel(w.a, w.b, mu // 2)
    return DiscreteChannel(a, b, w.description, check=False)


def virtual_channel_params(w: DiscreteChannel, n: int, mu: int = DEFAULT_MU,
                           *, with_bhattacharyya: bool = True) -> ChannelParams:
    """Upper-bound ``P(E_i)`` for all ``2**n`` synthesized channels of ``w``.

    Index bits are consumed most significant first; a 0 bit applies the
    minus transform and a 1 bit the plus transform, matching the natural
    order of :func:`qpi.polar_core.polar_transform`.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if mu < 2 or mu % 2:
        raise ValueError(f"mu must be an even integer >= 2, got {mu}")
    half = mu // 2
    level = [(w.a, w.b)]
    for _ in range(n):
        children = []
        for a, b in level:
            if 2 * a.size * a.size > MAX_OUTPUTS:
                raise ResourceError(
                    f"split of a channel with {a.size} half-symbols exceeds the cap of {MAX_OUTPUTS}")
            ma, mb = _minus_kernel(a, b)
            children.append(_merge_kernel(ma, mb, half))
            pa, pb = _plus_kernel(a, b)
            children.append(_merge_kernel(pa, pb, half))
        level = children
    p_err = np.array([b.sum() for _, b in level])
    z = np.array([2.0 * np.sqrt(a * b).sum() for a, b in level]) if with_bhattacharyya else None
    return ChannelParams(p_err=np.minimum(p_err, 0.5), bhattacharyya=z, mu=mu, source=w.description)


@lru_cache(maxsize=64)
def _bsc_params_cached(p: float, n: int, mu: int) -> ChannelParams:
    return virtual_channel_params(make_bsc(p), n, mu)


def bsc_virtual_channel_params(p: float, n: int, mu: int = DEFAULT_MU) -> ChannelParams:
    """Memoized :func:`virtual_channel_params` for ``BSC(p)``; do not mutate the result."""
    return _bsc_params_cached(float(p), int(n), int(mu))


def bec_bhattacharyya_exact(e: float, n: int) -> ChannelParams:
    """Exact BEC recursion ``Z- = 2Z - Z^2``, ``Z+ = Z^2`` in natural order."""
    if not 0 <= e <= 1:
        raise ValueError(f"erasure probability must lie in [0, 1], got {e}")
    z = np.array([float(e)])
    for _ in range(n):
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return ChannelParams(p_err=z / 2, bhattacharyya=z, source=f"BEC({e:g}) exact")
