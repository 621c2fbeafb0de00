"""Monte Carlo estimation of logical X error rates and alpha sweeps.

Every trial draws its error from its own generator seeded by
``(master_seed, trial_index)``, so counts do not depend on how trials are
split across worker threads.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterable, Optional, Sequence

import numpy as np

from .channels import DEFAULT_MU
from .construction import POLAR, CodeSpec, build_code
from .decoder import ListDecoder
from .polar_core import polar_transform

__all__ = [
    "SIM_SCHEMA",
    "SIM_COLUMNS",
    "SWEEP_COLUMNS",
    "SimConfig",
    "SimResult",
    "SweepEntry",
    "SweepResult",
    "worker_count",
    "trial_rng",
    "sample_error",
    "sample_errors",
    "run_trial",
    "wilson_interval",
    "estimate_logical_error_rate",
    "random_alphas",
    "alpha_sweep",
    "write_rows",
]

SIM_SCHEMA = "qpi-sim/1"
SIM_COLUMNS = ("q", "alpha", "n", "k1", "k2", "L", "coset", "trials", "failures",
               "rate", "ci_lo", "ci_hi", "seed")
SWEEP_COLUMNS = SIM_COLUMNS + ("valid", "is_alpha_star")

# Trials are generated and decoded in chunks of this size; the chunking is
# fixed so that early stopping is independent of the worker count.
CHUNK = 256


def worker_count(threads: Optional[int] = None) -> int:
    """Resolve the worker count: explicit value, then ``QPI_THREADS``, then CPU count."""
    if threads is None:
        env = os.environ.get("QPI_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValueError(f"QPI_THREADS must be an integer, got {env!r}") from None
        else:
            threads = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
    return max(1, int(threads or 1))


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent generator for one trial, derived from ``(master_seed, trial_index)``."""
    return np.random.default_rng([int(master_seed), int(trial_index)])


def sample_error(q: float, N: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. Bernoulli(q) X-error indicators of length ``N``."""
    if not 0 <= q <= 0.5:
        raise ValueError(f"q must lie in [0, 1/2], got {q}")
    return (rng.random(N) < q).astype(np.uint8)


def sample_errors(q: float, N: int, master_seed: int, start: int, stop: int) -> np.ndarray:
    """Errors of trials ``start..stop-1``, one row per trial."""
    out = np.empty((stop - start, N), np.uint8)
    for row, t in enumerate(range(start, stop)):
        out[row] = sample_error(q, N, trial_rng(master_seed, t))
    return out


def run_trial(spec: CodeSpec, q: float, list_size: int, coset_aggregation: bool,
              rng: np.random.Generator) -> bool:
    """Sample one error, decode its syndrome, and report whether decoding succeeded."""
    e = sample_error(q, spec.N, rng)
    decoder = ListDecoder(spec, q, list_size, coset_aggregation)
    return decoder.count_failures(polar_transform(e)[None, :]) == 0


def wilson_interval(failures: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = failures / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # clamp so the interval always contains the point estimate despite rounding
    return min(max(0.0, centre - half), p), max(min(1.0, centre + half), p)


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo experiment on a fixed code.

    ``max_failures`` enables early stopping once that many failures have
    been seen (checked at chunk boundaries); ``None`` runs all trials.
    """

    spec: CodeSpec
    q: float
    list_size: int = 16
    trials: int = 10_000
    master_seed: int = 0
    coset_aggregation: bool = True
    max_failures: Optional[int] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.list_size < 1:
            raise ValueError(f"list size must be >= 1, got {self.list_size}")
        if not 0 <= self.q <= 0.5:
            raise ValueError(f"q must lie in [0, 1/2], got {self.q}")
        if not self.spec.valid:
            raise ValueError("simulation requires a valid code spec (F_Z and F_X disjoint)")
        if self.max_failures is not None and self.max_failures < 1:
            raise ValueError("max_failures must be positive when set")


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    trials: int
    failures: int
    wall_time: float

    @property
    def logical_error_rate(self) -> float:
        return self.failures / self.trials

    @property
    def confidence_interval(self) -> tuple[float, float]:
        return wilson_interval(self.failures, self.trials)

    def row(self) -> dict:
        spec = self.config.spec
        lo, hi = self.confidence_interval
        return {
            "q": self.config.q,
            "alpha": spec.alpha,
            "n": spec.n,
            "k1": spec.k1,
            "k2": spec.k2,
            "L": self.config.list_size,
            "coset": "on" if self.config.coset_aggregation else "off",
            "trials": self.trials,
            "failures": self.failures,
            "rate": self.logical_error_rate,
            "ci_lo": lo,
            "ci_hi": hi,
            "seed": self.config.master_seed,
        }


def _chunk_failures(decoder: ListDecoder, q: float, N: int, seed: int,
                    start: int, stop: int) -> int:
    u = polar_transform(sample_errors(q, N, seed, start, stop))
    return decoder.count_failures(u)


def estimate_logical_error_rate(config: SimConfig, threads: Optional[int] = None) -> SimResult:
    """Run the trials of ``config`` and count logical failures.

    Counts are identical for any ``threads``: chunks are fixed, and with
    early stopping the cut is made at the first chunk (in trial order)
    where the running failure count reaches ``max_failures``.
    """
    started = time.perf_counter()
    spec = config.spec
    decoder = ListDecoder(spec, config.q, config.list_size, config.coset_aggregation)
    bounds = [(s, min(s + CHUNK, config.trials)) for s in range(0, config.trials, CHUNK)]
    workers = min(worker_count(threads), len(bounds))

    def work(b):
        return _chunk_failures(decoder, config.q, spec.N, config.master_seed, *b)

    failures = 0
    trials = 0
    if workers == 1:
        results: Iterable[int] = map(work, bounds)
        for (s, e), f in zip(bounds, results):
            failures += f
            trials = e
            if config.max_failures is not None and failures >= config.max_failures:
                break
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # submit in waves so early stopping does not queue the whole run
            for w in range(0, len(bounds), 4 * workers):
                wave = bounds[w:w + 4 * workers]
                stop = False
                for (s, e), f in zip(wave, pool.map(work, wave)):
                    failures += f
                    trials = e
                    if config.max_failures is not None and failures >= config.max_failures:
                        stop = True
                        break
                if stop:
                    break
    return SimResult(config=config, trials=trials, failures=failures,
                     wall_time=time.perf_counter() - started)


@dataclass(frozen=True)
class SweepEntry:
    alpha: float
    spec: CodeSpec
    result: Optional[SimResult]

    @property
    def valid(self) -> bool:
        return self.result is not None


@dataclass
class SweepResult:
    entries: list[SweepEntry] = field(default_factory=list)

    @property
    def alpha_star(self) -> Optional[float]:
        """Valid alpha with the lowest rate; ties go to the smaller alpha."""
        valid = [e for e in self.entries if e.valid]
        if not valid:
            return None
        best = min(valid, key=lambda e: (e.result.logical_error_rate, e.alpha))
        return best.alpha

    def rows(self) -> list[dict]:
        star = self.alpha_star
        rows = []
        for e in self.entries:
            if e.valid:
                row = e.result.row()
            else:
                spec = e.spec
                row = {c: "" for c in SIM_COLUMNS}
                row.update(alpha=e.alpha, n=spec.n, k1=spec.k1, k2=spec.k2, q=spec.q)
            row["valid"] = e.valid
            row["is_alpha_star"] = e.valid and e.alpha == star
            rows.append(row)
        return rows


def random_alphas(count: int, seed: int) -> list[float]:
    """``count`` values drawn uniformly from (0, 1]."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(int(seed))
    return [float(a) for a in 1.0 - rng.random(count)]


def alpha_sweep(n: int, k1: int, k2: int, q: float,
                alphas: Optional[Sequence[float]] = None, random_count: Optional[int] = None,
                trials: int = 10_000, list_size: int = 16, seed: int = 0,
                coset_aggregation: bool = True, mu: int = DEFAULT_MU,
                max_failures: Optional[int] = None, threads: Optional[int] = None) -> SweepResult:
    """Build a code per alpha, simulate the valid ones, and pick alpha*.

    Every alpha is simulated with the same master seed, so the entries are
    compared on common error samples.
    """
    if (alphas is None) == (random_count is None):
        raise ValueError("give exactly one of an explicit alpha grid or a random count")
    if alphas is None:
        alphas = random_alphas(random_count, seed)
    sweep = SweepResult()
    for alpha in alphas:
        spec = build_code(n, k1, k2, q, float(alpha), method=POLAR, mu=mu)
        result = None
        if spec.valid:
            config = SimConfig(spec=spec, q=q, list_size=list_size, trials=trials,
                               master_seed=seed, coset_aggregation=coset_aggregation,
                               max_failures=max_failures)
            result = estimate_logical_error_rate(config, threads)
        sweep.entries.append(SweepEntry(alpha=float(alpha), spec=spec, result=result))
    return sweep


def write_rows(path, rows: Sequence[dict], columns: Sequence[str], schema: str = SIM_SCHEMA,
               append: bool = False) -> None:
    """Write CSV rows under a ``#schema:`` comment line; appends skip the header."""
    exists = append and os.path.exists(path) and os.path.getsize(path) > 0
    with open(path, "a" if append else "w", newline="") as fh:
        if not exists:
            fh.write(f"#schema: {schema}\n")
        writer = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        if not exists:
            writer.writeheader()
        writer.writerows(rows)
