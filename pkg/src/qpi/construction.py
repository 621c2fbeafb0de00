"""Construction of alpha-interpolated QPC/QRM CSS codes.

Frozen sets are chosen from per-index channel quality: ``F_Z`` holds the
``N - k1`` worst bit-flip channels, ``F_X`` the ``N - k2`` worst phase-flip
channels, where the phase-flip quality of index ``i`` is the bit-flip quality
of ``N - 1 - i``. A code is a valid CSS code without entanglement assistance
iff the two frozen sets are disjoint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channels import DEFAULT_MU, ChannelParams, bsc_virtual_channel_params
from .polar_core import generator_matrix, popcount

__all__ = [
    "POLAR",
    "RM",
    "CodeSpec",
    "StabilizerSet",
    "rm_channel_scores",
    "build_frozen_sets",
    "build_code",
    "is_valid_css",
    "stabilizers",
    "commutation_violations",
    "mixing_factor",
    "interpolation_fractions",
]

POLAR = "polar"
RM = "rm"
_METHOD_ALIASES = {
    "polar": POLAR,
    "polar-interpolated": POLAR,
    "rm": RM,
    "reed-muller": RM,
}


@dataclass(frozen=True)
class CodeSpec:
    n: int
    k1: int
    k2: int
    alpha: float
    q: float
    method: str
    frozen_z: tuple[int, ...]
    frozen_x: tuple[int, ...]
    mu: Optional[int] = None
    bitflip_params: Optional[ChannelParams] = field(default=None, compare=False, repr=False)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def k(self) -> int:
        return self.k1 + self.k2 - self.N

    @property
    def information(self) -> tuple[int, ...]:
        frozen = set(self.frozen_z) | set(self.frozen_x)
        return tuple(i for i in range(self.N) if i not in frozen)

    @property
    def valid(self) -> bool:
        return is_valid_css(self)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "k1": self.k1,
            "k2": self.k2,
            "alpha": self.alpha,
            "q": self.q,
            "method": self.method,
            "mu": self.mu,
            "frozen_z": sorted(self.frozen_z),
            "frozen_x": sorted(self.frozen_x),
            "information": list(self.information),
            "valid": self.valid,
            "mixing_factor": mixing_factor(self),
        }

    def to_json(self, path=None, **kwargs) -> str:
        text = json.dumps(self.to_dict(), **kwargs)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, doc: dict) -> "CodeSpec":
        try:
            n = int(doc["n"])
            spec = cls(
                n=n,
                k1=int(doc["k1"]),
                k2=int(doc["k2"]),
                alpha=float(doc["alpha"]),
                q=float(doc["q"]),
                method=_METHOD_ALIASES[doc["method"]],
                frozen_z=tuple(sorted(int(i) for i in doc["frozen_z"])),
                frozen_x=tuple(sorted(int(i) for i in doc["frozen_x"])),
                mu=None if doc.get("mu") is None else int(doc["mu"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed code spec: {exc}") from exc
        N = 1 << n
        if "N" in doc and int(doc["N"]) != N:
            raise ValueError("code spec N does not match n")
        if len(spec.frozen_z) != N - spec.k1 or len(spec.frozen_x) != N - spec.k2:
            raise ValueError("frozen set sizes do not match k1/k2")
        if any(not 0 <= i < N for i in spec.frozen_z + spec.frozen_x):
            raise ValueError("frozen index out of range")
        return spec

    @classmethod
    def from_json(cls, path) -> "CodeSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class StabilizerSet:
    """Supports of the Z-type and X-type generators (rows are bit vectors)."""

    z_type: np.ndarray
    x_type: np.ndarray


def rm_channel_scores(n: int) -> np.ndarray:
    """RM virtual-channel quality ``popcount(i) + i / N``; all entries distinct."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    N = 1 << n
    idx = np.arange(N)
    weights = np.array([popcount(i) for i in range(N)], dtype=np.float64)
    return weights + idx / N


TIE_RTOL = 1e-12


def _tie_levels(scores: np.ndarray) -> np.ndarray:
    """Replace scores that agree to ``TIE_RTOL`` by a common value.

    Symmetric virtual channels can have mathematically equal error
    probabilities that differ in the last bits after the recursion.
    """
    order = np.argsort(scores, kind="stable")
    levels = scores.copy()
    head = scores[order[0]] if scores.size else 0.0
    prev = head
    for i in order:
        s = scores[i]
        if abs(s - prev) > TIE_RTOL * max(abs(s), abs(prev), 1e-300):
            head = s
        levels[i] = head
        prev = s
    return levels


def _worst(scores: np.ndarray, count: int) -> tuple[int, ...]:
    # Lowest score first; equal scores freeze the smaller index first.
    order = np.lexsort((np.arange(scores.size), _tie_levels(scores)))
    return tuple(sorted(int(i) for i in order[:count]))


def build_frozen_sets(scores, k1: int, k2: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Return ``(F_Z, F_X)`` from per-index quality (higher is better)."""
    scores = np.asarray(scores, dtype=np.float64)
    N = scores.size
    if not (0 <= k1 <= N and 0 <= k2 <= N):
        raise ValueError(f"dimensions k1={k1}, k2={k2} must lie in [0, {N}]")
    frozen_z = _worst(scores, N - k1)
    frozen_x = _worst(scores[::-1], N - k2)
    return frozen_z, frozen_x


def _normalize_method(method: str) -> str:
    try:
        return _METHOD_ALIASES[method]
    except KeyError:
        raise ValueError(f"unknown construction method {method!r}") from None


def build_code(n: int, k1: int, k2: int, q: float = 0.0, alpha: float = 1.0,
               method: str = POLAR, mu: int = DEFAULT_MU) -> CodeSpec:
    """Construct an alpha-QPC-QRM code (or the tie-broken QRM code).

    The polar method ranks indices by ``P(E_i)`` of ``BSC(alpha * q)``. With
    ``alpha * q == 0`` the polar ranking degenerates and the RM ranking is
    used instead, which is the alpha -> 0 limit.
    """
    method = _normalize_method(method)
    N = 1 << n
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not (0 <= k1 <= N and 0 <= k2 <= N):
        raise ValueError(f"dimensions k1={k1}, k2={k2} must lie in [0, {N}]")
    if k1 + k2 <= N:
        raise ValueError(f"quantum dimension k1 + k2 - N = {k1 + k2 - N} must be positive")
    params = None
    if method == POLAR:
        if not 0 <= alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        if not 0 <= q <= 1:
            raise ValueError(f"q must lie in [0, 1], got {q}")
        if alpha * q > 0.5:
            raise ValueError(f"alpha * q = {alpha * q} exceeds 1/2")
        if alpha * q == 0:
            scores = rm_channel_scores(n)
        else:
            params = bsc_virtual_channel_params(alpha * q, n, mu)
            scores = -params.p_err
    else:
        scores = rm_channel_scores(n)
    frozen_z, frozen_x = build_frozen_sets(scores, k1, k2)
    return CodeSpec(
        n=n, k1=k1, k2=k2, alpha=float(alpha), q=float(q), method=method,
        frozen_z=frozen_z, frozen_x=frozen_x,
        mu=mu if params is not None else None, bitflip_params=params,
    )


def is_valid_css(spec: CodeSpec) -> bool:
    return not (set(spec.frozen_z) & set(spec.frozen_x))


def stabilizers(spec: CodeSpec) -> StabilizerSet:
    """Z-type generators are columns of G on ``F_Z``; X-type are rows of G on ``F_X``."""
    if not is_valid_css(spec):
        raise ValueError("stabilizers requested for an invalid (non-commuting) code")
    g = generator_matrix(spec.n)
    z_type = np.ascontiguousarray(g[:, list(spec.frozen_z)].T)
    x_type = np.ascontiguousarray(g[list(spec.frozen_x), :])
    return StabilizerSet(z_type=z_type, x_type=x_type)


def commutation_violations(stabs: StabilizerSet) -> int:
    """Number of (Z, X) generator pairs with odd overlap."""
    if len(stabs.z_type) == 0 or len(stabs.x_type) == 0:
        return 0
    overlap = stabs.z_type.astype(np.int64) @ stabs.x_type.astype(np.int64).T
    return int(np.count_nonzero(overlap & 1))


def mixing_factor(spec: CodeSpec) -> int:
    """Non-frozen indices (w.r.t. ``F_Z``) below the largest index of ``F_Z``."""
    if not spec.frozen_z:
        return 0
    last = max(spec.frozen_z)
    frozen = set(spec.frozen_z)
    return sum(1 for i in range(last) if i not in frozen)


def interpolation_fractions(spec_alpha: CodeSpec, spec_polar: CodeSpec,
                            spec_rm: CodeSpec) -> tuple[float, float]:
    """Share of ``F_Z(alpha)`` overlapping the polar (alpha=1) and RM frozen sets."""
    if len({spec_alpha.N, spec_polar.N, spec_rm.N}) != 1 or len({spec_alpha.k1, spec_polar.k1, spec_rm.k1}) != 1:
        raise ValueError("all specs must share N and k1")
    fz = set(spec_alpha.frozen_z)
    polar = set(spec_polar.frozen_z)
    rm = set(spec_rm.frozen_z)
    f_polar = len(fz & polar) / len(polar) if polar else 1.0
    f_rm = len(fz & rm) / len(rm) if rm else 1.0
    return f_polar, f_rm
