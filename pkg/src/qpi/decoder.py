"""SC, SCL and coset-aggregating SCL (SCL-C) syndrome decoders for X errors.

The X-error decoding problem is reduced to polar decoding of the all-zero
received word: an error ``e`` has ``u = e G``, the decoder sees the prior LLR
``log((1 - q) / q)`` on every position, ``F_Z`` inputs are frozen to the
syndrome ``u[F_Z]``, and both ``F_X`` and information inputs are branched.
Path metrics are exact: ``-log P(u_0..u_i | y)`` with uniform input prior, so
a complete path's metric is ``-log P(e = u G)``.

LLR recursion uses natural order: for a node of size ``2s`` with LLRs ``l``,
the left child sees ``f(l[j], l[j + s])`` and the right child sees
``l[j + s] + (1 - 2 x_left[j]) l[j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from numba import njit

from .polar_core import log2_length, polar_transform

__all__ = [
    "DecodeTask",
    "DecodeResult",
    "ListDecoder",
    "sc_decode",
    "scl_decode",
    "scl_c_decode",
    "error_estimate_from_u",
    "prior_llr",
    "genie_sc_errors",
]

# exp(-40) ~ 4e-18: below this the f-correction terms are dropped.
_CORRECTION_CUTOFF = 40.0
# Relative tolerance under which two coset scores count as tied.
COSET_TIE_RTOL = 1e-9
_LLR_CAP = 1e4


def prior_llr(q: float, N: int) -> np.ndarray:
    """Uniform prior LLR ``log((1 - q) / q)`` (capped for ``q == 0``)."""
    if not 0 <= q <= 0.5:
        raise ValueError(f"q must lie in [0, 1/2], got {q}")
    value = _LLR_CAP if q == 0 else min(_LLR_CAP, math.log((1.0 - q) / q))
    return np.full(N, value)


# ---------------------------------------------------------------------------
# LLR kernels
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _f(a, b):
    # exact check-node update 2 atanh(tanh(a/2) tanh(b/2)) in magnitude form
    aa = abs(a)
    ab = abs(b)
    m = aa if aa < ab else ab
    d = abs(aa - ab)
    if d < _CORRECTION_CUTOFF:
        e_diff = math.exp(-d)
        if aa + ab < _CORRECTION_CUTOFF:
            # log(1 + e^-(|a|+|b|)) - log(1 + e^-d) folded into one log1p
            m += math.log1p((math.exp(-(aa + ab)) - e_diff) / (1.0 + e_diff))
        else:
            m -= math.log1p(e_diff)
    if (a < 0) != (b < 0):
        m = -m
    return m


@njit(cache=True, inline="always")
def _phi(llr, bit):
    # -log P(bit | llr)
    a = abs(llr)
    pen = math.log1p(math.exp(-a))
    if (bit == 0 and llr < 0) or (bit == 1 and llr > 0):
        pen += a
    return pen


@njit(cache=True)
def _sc_kernel(llr_in, frozen, frozen_val, genie, use_genie):
    """Plain SC. Returns (u_hat, decisions, metric).

    ``decisions[i]`` is the hard decision from the LLR sign (sign 0 -> 0)
    ignoring freezing; with ``use_genie`` the true ``genie`` bits are fed
    back instead of the decoder's own estimates.
    """
    N = llr_in.size
    n = 0
    while (1 << n) < N:
        n += 1
    alpha = np.zeros((n, N))
    beta = np.zeros((n, N), np.uint8)
    xbuf = np.zeros(N, np.uint8)
    xtmp = np.zeros(N, np.uint8)
    u = np.zeros(N, np.uint8)
    decisions = np.zeros(N, np.uint8)
    metric = 0.0
    for i in range(N):
        if i == 0:
            top = n - 1
        else:
            top = 0
            while not (i >> top) & 1:
                top += 1
        for lam in range(top, -1, -1):
            s = 1 << lam
            if lam == n - 1:
                src = llr_in
            else:
                src = alpha[lam + 1]
            if lam == top and i != 0:
                for j in range(s):
                    if beta[lam, j]:
                        alpha[lam, j] = src[j + s] - src[j]
                    else:
                        alpha[lam, j] = src[j + s] + src[j]
            else:
                for j in range(s):
                    alpha[lam, j] = _f(src[j], src[j + s])
        leaf = alpha[0, 0]
        decisions[i] = 1 if leaf < 0 else 0
        if frozen[i]:
            bit = frozen_val[i]
        else:
            bit = decisions[i]
        if use_genie:
            bit = genie[i]
        u[i] = bit
        metric += _phi(leaf, bit)
        # partial sums
        xbuf[0] = bit
        lam = 0
        while lam < n - 1 and (i >> lam) & 1:
            s = 1 << lam
            for j in range(s):
                xtmp[j] = beta[lam, j] ^ xbuf[j]
                xtmp[j + s] = xbuf[j]
            for j in range(2 * s):
                xbuf[j] = xtmp[j]
            lam += 1
        if not (i >> lam) & 1:
            for j in range(1 << lam):
                beta[lam, j] = xbuf[j]
    return u, decisions, metric


@njit(cache=True, inline="always")
def _writable(ptr, ref, free, nfree, path, lam):
    slot = ptr[path, lam]
    if ref[lam, slot] == 1:
        return slot
    ref[lam, slot] -= 1
    nfree[lam] -= 1
    new = free[lam, nfree[lam]]
    ref[lam, new] = 1
    ptr[path, lam] = new
    return new


@njit(cache=True, inline="always")
def _release(ptr, ref, free, nfree, path, n):
    for lam in range(n):
        slot = ptr[path, lam]
        ref[lam, slot] -= 1
        if ref[lam, slot] == 0:
            free[lam, nfree[lam]] = slot
            nfree[lam] += 1


@njit(cache=True)
def _scl_kernel(llr_in, frozen, frozen_val, list_size):
    """List decoder with lazy copying; returns (u, metrics, order, count).

    ``order[:count]`` lists surviving path ids in lexicographic order of
    their decisions; ``metrics`` are ``-log`` probabilities.
    """
    N = llr_in.size
    n = 0
    while (1 << n) < N:
        n += 1
    L = list_size
    alpha = np.zeros((n + 1, L, N))
    alpha[n, 0, :] = llr_in
    beta = np.zeros((n, L, N), np.uint8)
    a_ptr = np.zeros((L, n), np.int64)
    b_ptr = np.zeros((L, n), np.int64)
    a_ref = np.zeros((n, L), np.int64)
    b_ref = np.zeros((n, L), np.int64)
    a_free = np.zeros((n, L), np.int64)
    b_free = np.zeros((n, L), np.int64)
    a_nfree = np.zeros(n, np.int64)
    b_nfree = np.zeros(n, np.int64)
    for lam in range(n):
        # slot 0 goes to path 0; the rest are free
        a_ref[lam, 0] = 1
        b_ref[lam, 0] = 1
        for s in range(L - 1, 0, -1):
            a_free[lam, a_nfree[lam]] = s
            a_nfree[lam] += 1
            b_free[lam, b_nfree[lam]] = s
            b_nfree[lam] += 1
    u = np.zeros((L, N), np.uint8)
    metric = np.zeros(L)
    path_free = np.zeros(L, np.int64)
    n_path_free = 0
    for p in range(L - 1, 0, -1):
        path_free[n_path_free] = p
        n_path_free += 1
    order = np.zeros(L, np.int64)
    new_order = np.zeros(L, np.int64)
    count = 1
    leaf = np.zeros(L)
    cand = np.zeros(2 * L)
    keep = np.zeros(2 * L, np.bool_)
    ranked = np.zeros(2 * L, np.int64)
    agrees = np.zeros(2 * L, np.bool_)
    xbuf = np.zeros(N, np.uint8)
    xtmp = np.zeros(N, np.uint8)

    for i in range(N):
        if i == 0:
            top = n - 1
        else:
            top = 0
            while not (i >> top) & 1:
                top += 1
        for k in range(count):
            p = order[k]
            for lam in range(top, -1, -1):
                s = 1 << lam
                dst = _writable(a_ptr, a_ref, a_free, a_nfree, p, lam)
                # level n holds the channel LLRs in slot 0
                src = a_ptr[p, lam + 1] if lam + 1 < n else 0
                if lam == top and i != 0:
                    bs = b_ptr[p, lam]
                    for j in range(s):
                        if beta[lam, bs, j]:
                            alpha[lam, dst, j] = alpha[lam + 1, src, j + s] - alpha[lam + 1, src, j]
                        else:
                            alpha[lam, dst, j] = alpha[lam + 1, src, j + s] + alpha[lam + 1, src, j]
                else:
                    for j in range(s):
                        alpha[lam, dst, j] = _f(alpha[lam + 1, src, j], alpha[lam + 1, src, j + s])
            leaf[p] = alpha[0, a_ptr[p, 0], 0]

        if frozen[i]:
            bit = frozen_val[i]
            for k in range(count):
                p = order[k]
                metric[p] += _phi(leaf[p], bit)
                u[p, i] = bit
        else:
            for k in range(count):
                p = order[k]
                cand[2 * k] = metric[p] + _phi(leaf[p], 0)
                cand[2 * k + 1] = metric[p] + _phi(leaf[p], 1)
                # the LLR sign (0 -> bit 0) settles ties that rounding hides in the metric
                hard = 1 if leaf[p] < 0 else 0
                agrees[2 * k] = hard == 0
                agrees[2 * k + 1] = hard == 1
            ncand = 2 * count
            if ncand <= L:
                for c in range(ncand):
                    keep[c] = True
            else:
                # stable insertion sort by (metric, sign agreement); remaining
                # ties keep lexicographic order
                for c in range(ncand):
                    keep[c] = False
                    v = cand[c]
                    r = c
                    while r > 0:
                        prev = ranked[r - 1]
                        if cand[prev] > v or (cand[prev] == v and agrees[c] and not agrees[prev]):
                            ranked[r] = prev
                            r -= 1
                        else:
                            break
                    ranked[r] = c
                for r in range(L):
                    keep[ranked[r]] = True
            # kill first so clones find free slots
            for k in range(count):
                if not keep[2 * k] and not keep[2 * k + 1]:
                    p = order[k]
                    _release(a_ptr, a_ref, a_free, a_nfree, p, n)
                    _release(b_ptr, b_ref, b_free, b_nfree, p, n)
                    path_free[n_path_free] = p
                    n_path_free += 1
            new_count = 0
            for k in range(count):
                k0 = keep[2 * k]
                k1 = keep[2 * k + 1]
                if not k0 and not k1:
                    continue
                p = order[k]
                if k0 and k1:
                    n_path_free -= 1
                    c = path_free[n_path_free]
                    for lam in range(n):
                        a_ptr[c, lam] = a_ptr[p, lam]
                        a_ref[lam, a_ptr[p, lam]] += 1
                        b_ptr[c, lam] = b_ptr[p, lam]
                        b_ref[lam, b_ptr[p, lam]] += 1
                    u[c, :i] = u[p, :i]
                    leaf[c] = leaf[p]
                    u[p, i] = 0
                    metric[p] = cand[2 * k]
                    u[c, i] = 1
                    metric[c] = cand[2 * k + 1]
                    new_order[new_count] = p
                    new_order[new_count + 1] = c
                    new_count += 2
                else:
                    bit = 0 if k0 else 1
                    u[p, i] = bit
                    metric[p] = cand[2 * k + bit]
                    new_order[new_count] = p
                    new_count += 1
            count = new_count
            for k in range(count):
                order[k] = new_order[k]

        # partial sums
        for k in range(count):
            p = order[k]
            xbuf[0] = u[p, i]
            lam = 0
            while lam < n - 1 and (i >> lam) & 1:
                s = 1 << lam
                bs = b_ptr[p, lam]
                for j in range(s):
                    xtmp[j] = beta[lam, bs, j] ^ xbuf[j]
                    xtmp[j + s] = xbuf[j]
                for j in range(2 * s):
                    xbuf[j] = xtmp[j]
                lam += 1
            if not (i >> lam) & 1:
                dst = _writable(b_ptr, b_ref, b_free, b_nfree, p, lam)
                for j in range(1 << lam):
                    beta[lam, dst, j] = xbuf[j]
    return u, metric, order, count


@njit(cache=True)
def _logaddexp(x, y):
    if x < y:
        x, y = y, x
    return x + math.log1p(math.exp(y - x))


@njit(cache=True)
def _less_pattern(u, p, r, info):
    # lexicographic comparison of information bits of paths p and r
    for t in range(info.size):
        a = u[p, info[t]]
        b = u[r, info[t]]
        if a != b:
            return a < b
    return False


@njit(cache=True)
def _aggregate(u, metric, order, count, info):
    """Group paths by information pattern; return (group id per rank, scores, best path)."""
    group = np.full(count, -1, np.int64)
    rep = np.zeros(count, np.int64)
    score = np.zeros(count)
    ngroups = 0
    for k in range(count):
        p = order[k]
        found = -1
        for g in range(ngroups):
            r = rep[g]
            same = True
            for t in range(info.size):
                if u[p, info[t]] != u[r, info[t]]:
                    same = False
                    break
            if same:
                found = g
                break
        if found < 0:
            found = ngroups
            rep[found] = p
            score[found] = -metric[p]
            ngroups += 1
        else:
            score[found] = _logaddexp(score[found], -metric[p])
        group[k] = found
    best = 0
    for g in range(1, ngroups):
        diff = score[g] - score[best]
        tol = COSET_TIE_RTOL * max(abs(score[g]), abs(score[best]), 1.0)
        if diff > tol or (abs(diff) <= tol and _less_pattern(u, rep[g], rep[best], info)):
            best = g
    return group, score[:ngroups].copy(), best


@njit(cache=True, nogil=True)
def _count_failures(u_true, llr, frozen, info, list_size, coset):
    """Decode every row of ``u_true`` (with syndrome ``u_true[F_Z]``); count logical failures."""
    failures = 0
    N = llr.size
    fv = np.zeros(N, np.uint8)
    for t in range(u_true.shape[0]):
        for i in range(N):
            fv[i] = u_true[t, i] if frozen[i] else 0
        u, metric, order, count = _scl_kernel(llr, frozen, fv, list_size)
        if coset:
            group, score, best_group = _aggregate(u, metric, order, count, info)
            best = -1
            for k in range(count):
                if group[k] == best_group:
                    p = order[k]
                    if best < 0 or metric[p] < metric[best]:
                        best = p
        else:
            best = order[0]
            for k in range(1, count):
                p = order[k]
                if metric[p] < metric[best]:
                    best = p
        for j in range(info.size):
            if u[best, info[j]] != u_true[t, info[j]]:
                failures += 1
                break
    return failures


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


@dataclass
class DecodeTask:
    """One syndrome-decoding problem.

    ``frozen_values`` maps each ``F_Z`` index to its syndrome bit;
    ``dont_care`` (``F_X``) and ``information`` are branched.
    """

    n: int
    prior_llr: np.ndarray
    frozen_values: Mapping[int, int]
    dont_care: Sequence[int] = ()
    information: Sequence[int] = ()
    list_size: int = 1
    coset_aggregation: bool = False

    def __post_init__(self):
        N = 1 << self.n
        self.prior_llr = np.ascontiguousarray(self.prior_llr, dtype=np.float64)
        if self.prior_llr.shape != (N,):
            raise ValueError(f"prior_llr must have length {N}")
        if not np.all(np.isfinite(self.prior_llr)):
            raise ValueError("prior LLRs must be finite")
        parts = [set(self.frozen_values), set(self.dont_care), set(self.information)]
        if sum(len(s) for s in parts) != N or set().union(*parts) != set(range(N)):
            raise ValueError("frozen, dont_care and information indices must partition [0, N)")
        if self.list_size < 1:
            raise ValueError("list size must be >= 1")

    @classmethod
    def from_spec(cls, spec, syndrome, q: float, list_size: int = 1,
                  coset_aggregation: bool = False) -> "DecodeTask":
        """Task for ``spec`` given syndrome bits ordered like ``sorted(spec.frozen_z)``."""
        fz = sorted(spec.frozen_z)
        syndrome = np.asarray(syndrome, dtype=np.uint8)
        if syndrome.size != len(fz):
            raise ValueError("syndrome length must equal |F_Z|")
        return cls(
            n=spec.n,
            prior_llr=prior_llr(q, spec.N),
            frozen_values=dict(zip(fz, syndrome.tolist())),
            dont_care=tuple(spec.frozen_x),
            information=tuple(spec.information),
            list_size=list_size,
            coset_aggregation=coset_aggregation,
        )

    def arrays(self):
        N = 1 << self.n
        frozen = np.zeros(N, np.bool_)
        values = np.zeros(N, np.uint8)
        for i, v in self.frozen_values.items():
            frozen[i] = True
            values[i] = v
        info = np.array(sorted(self.information), dtype=np.int64)
        return frozen, values, info


@dataclass
class DecodeResult:
    u_hat_information: np.ndarray
    best_path: np.ndarray
    path_metrics: np.ndarray  # log-probabilities, descending
    paths: np.ndarray = field(repr=False, default=None)
    coset_scores: Optional[np.ndarray] = None
    coset_patterns: Optional[np.ndarray] = field(repr=False, default=None)

    @property
    def error_estimate(self) -> np.ndarray:
        return error_estimate_from_u(self.best_path)


def _check_n(task: DecodeTask) -> None:
    if task.n < 1:
        raise ValueError("n must be >= 1")


def sc_decode(task: DecodeTask) -> DecodeResult:
    """Successive cancellation; frozen bits forced, others by LLR sign (0 -> 0)."""
    _check_n(task)
    frozen, values, info = task.arrays()
    dummy = np.zeros(frozen.size, np.uint8)
    u, _, metric = _sc_kernel(task.prior_llr, frozen, values, dummy, False)
    return DecodeResult(
        u_hat_information=u[info].copy(),
        best_path=u,
        path_metrics=np.array([-metric]),
        paths=u[None, :].copy(),
    )


def scl_decode(task: DecodeTask) -> DecodeResult:
    """List decoding; returns surviving paths sorted by metric (best first).

    With ``task.coset_aggregation`` the result is :func:`scl_c_decode`.
    """
    _check_n(task)
    if task.coset_aggregation:
        return scl_c_decode(task)
    frozen, values, info = task.arrays()
    u, metric, order, count = _scl_kernel(task.prior_llr, frozen, values, task.list_size)
    ids = order[:count]
    # order is lexicographic; a stable sort by metric breaks ties toward smaller paths
    ranked = ids[np.argsort(metric[ids], kind="stable")]
    paths = u[ranked].copy()
    return DecodeResult(
        u_hat_information=paths[0, info].copy(),
        best_path=paths[0].copy(),
        path_metrics=-metric[ranked],
        paths=paths,
    )


def scl_c_decode(task: DecodeTask) -> DecodeResult:
    """List decoding followed by coset aggregation over ``F_X``.

    Surviving paths are grouped by their bits on the information set; a
    group's score is the log-sum-exp of its members' log-probabilities and
    the best group's information pattern is returned.
    """
    _check_n(task)
    frozen, values, info = task.arrays()
    u, metric, order, count = _scl_kernel(task.prior_llr, frozen, values, task.list_size)
    group, scores, best_group = _aggregate(u, metric, order, count, info)
    ids = order[:count]
    ranked_pos = np.argsort(metric[ids], kind="stable")
    ranked = ids[ranked_pos]
    members = [k for k in ranked_pos if group[k] == best_group]
    best = ids[members[0]]
    patterns = []
    for g in range(scores.size):
        k = int(np.flatnonzero(group == g)[0])
        patterns.append(u[ids[k], info])
    return DecodeResult(
        u_hat_information=u[best, info].copy(),
        best_path=u[best].copy(),
        path_metrics=-metric[ranked],
        paths=u[ranked].copy(),
        coset_scores=scores,
        coset_patterns=np.array(patterns, dtype=np.uint8).reshape(scores.size, info.size),
    )


def error_estimate_from_u(u_hat) -> np.ndarray:
    """``e_hat = u_hat G`` (G is its own inverse)."""
    return polar_transform(u_hat)


def genie_sc_errors(llr, u_true) -> np.ndarray:
    """Per-index SC errors when every earlier bit is supplied by a genie."""
    u_true = np.ascontiguousarray(u_true, dtype=np.uint8)
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    log2_length(u_true.size)
    frozen = np.zeros(u_true.size, np.bool_)
    _, decisions, _ = _sc_kernel(llr, frozen, u_true, u_true, True)
    return (decisions != u_true).astype(np.uint8)


class ListDecoder:
    """Reusable SCL(-C) decoder bound to one code spec and noise level."""

    def __init__(self, spec, q: float, list_size: int = 16, coset_aggregation: bool = True):
        if not spec.valid:
            raise ValueError("cannot decode an invalid code spec")
        self.spec = spec
        self.list_size = int(list_size)
        self.coset_aggregation = bool(coset_aggregation)
        self.llr = prior_llr(q, spec.N)
        self.frozen = np.zeros(spec.N, np.bool_)
        self.frozen[list(spec.frozen_z)] = True
        self.info = np.array(spec.information, dtype=np.int64)

    def count_failures(self, u_true: np.ndarray) -> int:
        """Logical failures over a batch of true ``u = e G`` rows."""
        u_true = np.ascontiguousarray(u_true, dtype=np.uint8)
        if u_true.shape[0] == 0:
            return 0
        return int(_count_failures(u_true, self.llr, self.frozen, self.info,
                                   self.list_size, self.coset_aggregation))
