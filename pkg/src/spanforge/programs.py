"""Concrete program families: the randomized rank test, its threshold-function
reduction, and the two hand-built query lower-bound examples.

The rank-r test works in R^n: draw a standard-normal target t and n-r
standard-normal free vectors, then ask whether t can be reached from the
columns of A together with the free span.  Matrices of rank at least r make
the combined span (generically) all of R^n, so the answer is yes with
probability 1; for rank below r the target misses the span almost surely.
Witness sizes concentrate: positives scale with (n-r+1)*r*L^2 where L bounds
the reciprocal-singular-value mean of A, negatives follow the inverse square
of a standard normal, so a fixed threshold is exceeded rarely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .highlevel import HighLevelProgram
from .linalg import DEFAULT_TOL, as_matrix
from .lowlevel import normalize_bits
from .randmat import RngStream, spectral_stats


@dataclass(frozen=True)
class RankInstance:
    """An n x m matrix with entries in [-1, 1], a rank threshold r, and a
    promised bound L on the reciprocal-singular-value mean c_r for positive
    instances."""

    matrix: np.ndarray
    r: int
    L: float

    def __post_init__(self):
        a = as_matrix(self.matrix)
        object.__setattr__(self, "matrix", a)
        n = a.shape[0]
        if not 0 <= self.r <= n:
            raise ValueError(f"rank threshold {self.r} outside [0, {n}]")
        if a.size and np.abs(a).max() > 1.0 + 1e-12:
            raise ValueError("matrix entries must lie in [-1, 1]")
        if self.L <= 0:
            raise ValueError(f"promised bound L must be positive, got {self.L}")


@dataclass(frozen=True)
class RankProgramSample:
    """One random draw of the rank-test program: target plus n-r free vectors."""

    program: HighLevelProgram
    s: int

    def __post_init__(self):
        if self.program.free_basis.shape[1] != self.s:
            raise ValueError(
                f"free basis has {self.program.free_basis.shape[1]} columns, expected s={self.s}"
            )


def build_rank_program(n: int, m: int, r: int, rng: np.random.Generator) -> RankProgramSample:
    """Sample the rank-r test program on n-dimensional inputs with m columns."""
    if not 0 <= r <= n:
        raise ValueError(f"rank threshold {r} outside [0, {n}]")
    s = n - r
    t = rng.standard_normal(n)
    v = rng.standard_normal((n, s))
    prog = HighLevelProgram(space_dim=n, num_inputs=m, target=t, free_basis=v)
    return RankProgramSample(program=prog, s=s)


def rank_decision(instance: RankInstance, rng: np.random.Generator, tol: float = DEFAULT_TOL) -> int:
    """Evaluate a fresh program sample on the instance matrix."""
    n, m = instance.matrix.shape
    sample = build_rank_program(n, m, instance.r, rng)
    prog = sample.program
    if tol != prog.tol:
        prog = HighLevelProgram(
            space_dim=n, num_inputs=m, target=prog.target, free_basis=prog.free_basis, tol=tol
        )
    return prog.evaluate(instance.matrix)


def threshold_matrix(x) -> np.ndarray:
    """diag(x) for a bit-string x; rank equals the Hamming weight."""
    bits = normalize_bits(x, len(x))
    return np.diag(np.array(bits, dtype=float))


def grover_dj_program(n: int, m: int) -> HighLevelProgram:
    """All-ones target in R^n; promise inputs have +-1 columns that are each
    all-ones or balanced.  Any all-ones column reaches the target with a unit
    coefficient; when every column is balanced, t/n certifies rejection."""
    if n <= 0 or n % 2:
        raise ValueError(f"n must be positive and even, got {n}")
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}")
    return HighLevelProgram(
        space_dim=n, num_inputs=m, target=np.ones(n), free_basis=np.zeros((n, 0))
    )


def grover_dj_columns(n: int) -> list[np.ndarray]:
    """The promise column family: the all-ones column first, then every
    balanced +-1 column in lexicographic sign order."""
    if n <= 0 or n % 2:
        raise ValueError(f"n must be positive and even, got {n}")
    cols = [np.ones(n)]
    for mask in range(1 << n):
        signs = np.array([1.0 if (mask >> i) & 1 else -1.0 for i in range(n)])
        if signs.sum() == 0.0:
            cols.append(signs)
    return cols


def unique_search_program(n: int) -> HighLevelProgram:
    """Single-column program in R^(n+1) with target e_0."""
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    t = np.zeros(n + 1)
    t[0] = 1.0
    return HighLevelProgram(space_dim=n + 1, num_inputs=1, target=t, free_basis=np.zeros((n + 1, 0)))


def unique_search_input(x) -> np.ndarray:
    """Column e_0 + sum of e_i over set bits of x, as an (n+1) x 1 matrix."""
    bits = normalize_bits(x, len(x))
    col = np.zeros(len(bits) + 1)
    col[0] = 1.0
    for i, b in enumerate(bits):
        if b:
            col[i + 1] = 1.0
    return col.reshape(-1, 1)


# ---------------------------------------------------------------------------
# rank-experiment trial machinery


@dataclass(frozen=True)
class RankExperimentConfig:
    n: int
    m: int
    r: int
    L: float | None
    trials: int
    master_seed: int
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        if self.n <= 0 or self.m <= 0:
            raise ValueError("n and m must be positive")
        if not 1 <= self.r <= self.n:
            raise ValueError(f"r must lie in [1, {self.n}], got {self.r}")
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        if self.L is not None and self.L <= 0:
            raise ValueError("L must be positive when given")

    @classmethod
    def from_json_dict(cls, data: dict) -> "RankExperimentConfig":
        for key in ("n", "m", "r", "trials", "master_seed"):
            if key not in data:
                raise ValueError(f"rank experiment config is missing field '{key}'")
        return cls(
            n=int(data["n"]),
            m=int(data["m"]),
            r=int(data["r"]),
            L=None if data.get("L") is None else float(data["L"]),
            trials=int(data["trials"]),
            master_seed=int(data["master_seed"]),
            tolerance=float(data.get("tolerance", DEFAULT_TOL)),
        )

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "r": self.r,
            "L": self.L,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "tolerance": self.tolerance,
        }


def random_rank_matrix(n: int, m: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    """Matrix of exact rank with entries rescaled into [-1, 1]: orthonormal
    factors around a uniform [0.5, 1.5] spectrum, then divided by the largest
    absolute entry."""
    if rank == 0:
        return np.zeros((n, m))
    q1 = np.linalg.qr(rng.standard_normal((n, rank)))[0]
    q2 = np.linalg.qr(rng.standard_normal((m, rank)))[0]
    sigma = rng.uniform(0.5, 1.5, rank)
    a = (q1 * sigma) @ q2.T
    return a / np.abs(a).max()


MAX_PROMISE_RESAMPLES = 64


@dataclass(frozen=True)
class RankTrialRow:
    trial: int
    side: str  # "rank_ge_r" | "rank_lt_r"
    decision: int
    correct: bool
    witness_size: float
    c_r: float
    L_used: float
    bound: float
    within_bound: bool
    promise_met: bool


@dataclass(frozen=True)
class RankTrialSummary:
    config: RankExperimentConfig
    rows: tuple[RankTrialRow, ...]
    fraction_correct: float
    positive_within_bound: float
    negative_within_threshold: float
    bound_constant: float
    negative_threshold: float


def run_rank_trials(
    config: RankExperimentConfig,
    bound_constant: float,
    negative_threshold: float = 25.0,
    stream: RngStream | None = None,
) -> RankTrialSummary:
    """Per trial, one rank-r (positive) and one rank-(r-1) (negative)
    instance, each judged by a fresh program sample.

    Positive rows check witness_size <= C*(n-r+1)*r*L^2 with L the measured
    c_r (or the configured promise, met by bounded resampling).  Negative
    rows check witness_size <= the fixed threshold.  Both checks hold with
    probability 5/6-ish per trial, not always; callers assert frequencies.
    """
    if stream is None:
        stream = RngStream(seed=config.master_seed)
    n, m, r = config.n, config.m, config.r
    rows = []
    for trial in range(config.trials):
        rng = stream.generator(trial)
        # positive side: rank exactly r
        a = random_rank_matrix(n, m, r, rng)
        c_r = spectral_stats(a, r).c_r
        promise_met = True
        if config.L is not None:
            attempts = 0
            while c_r > config.L and attempts < MAX_PROMISE_RESAMPLES:
                a = random_rank_matrix(n, m, r, rng)
                c_r = spectral_stats(a, r).c_r
                attempts += 1
            promise_met = c_r <= config.L
            l_used = config.L
        else:
            l_used = c_r
        sample = build_rank_program(n, m, r, rng)
        decision = sample.program.evaluate(a)
        bound = bound_constant * (n - r + 1) * r * l_used**2
        if decision:
            size = sample.program.positive_witness(a).size
        else:
            size = float("inf")
        rows.append(
            RankTrialRow(
                trial=trial, side="rank_ge_r", decision=decision, correct=decision == 1,
                witness_size=size, c_r=c_r, L_used=l_used, bound=bound,
                within_bound=size <= bound, promise_met=promise_met,
            )
        )
        # negative side: rank exactly r-1
        a_neg = random_rank_matrix(n, m, r - 1, rng)
        sample_neg = build_rank_program(n, m, r, rng)
        decision_neg = sample_neg.program.evaluate(a_neg)
        if decision_neg:
            size_neg = float("inf")
        else:
            size_neg = sample_neg.program.negative_witness(a_neg).size
        rows.append(
            RankTrialRow(
                trial=trial, side="rank_lt_r", decision=decision_neg, correct=decision_neg == 0,
                witness_size=size_neg, c_r=float("inf"), L_used=l_used,
                bound=negative_threshold, within_bound=size_neg <= negative_threshold,
                promise_met=True,
            )
        )
    rows = tuple(rows)
    pos = [row for row in rows if row.side == "rank_ge_r" and row.promise_met]
    neg = [row for row in rows if row.side == "rank_lt_r"]
    return RankTrialSummary(
        config=config,
        rows=rows,
        fraction_correct=float(np.mean([row.correct for row in rows])),
        positive_within_bound=float(np.mean([row.within_bound for row in pos])) if pos else 0.0,
        negative_within_threshold=float(np.mean([row.within_bound for row in neg])) if neg else 0.0,
        bound_constant=bound_constant,
        negative_threshold=negative_threshold,
    )
