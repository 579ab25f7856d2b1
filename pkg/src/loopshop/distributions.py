"""Discrete distributions of required loop counts.

Every distribution is stored as a finite probability table on positive
integers.  Constructors for infinite families (geometric, negative binomial,
consecutive-success) truncate at a caller-chosen tail mass ``epsilon`` and
fold the removed mass into the largest retained support point, so survival
probabilities P(Y > k) are exact for every k below the truncation point.
Moments, hazards, and conditional means are computed from the stored table;
the resulting bias is bounded by the folded tail mass times the support span.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

DEFAULT_EPSILON = 1e-9

_NORMALIZATION_TOL = 1e-12
_EMPIRICAL_SUM_TOL = 1e-9


class DistributionError(ValueError):
    """Invalid parameters or malformed probability tables."""


class UndefinedHazardError(DistributionError):
    """Conditioning event P(Y > k) has zero mass."""


class InsufficientTableError(DistributionError):
    """A hazard-family table is too short for the requested evaluation."""


@dataclass(frozen=True)
class LoopDistribution:
    """Finite pmf of a job's required loop count.

    ``support`` is strictly increasing, all entries >= 1, all stored
    probabilities are > 0 and sum to one within 1e-12.  ``truncation_tail``
    records how much probability mass was folded into ``support[-1]`` when an
    infinite distribution was truncated.
    """

    kind: str
    params: tuple[tuple[str, float], ...]
    support: tuple[int, ...]
    probs: tuple[float, ...]
    truncation_tail: float = 0.0
    tag: str = ""

    def __post_init__(self) -> None:
        if not self.support:
            raise DistributionError("empty support")
        if len(self.support) != len(self.probs):
            raise DistributionError("support/probability length mismatch")
        prev = 0
        for k in self.support:
            if not isinstance(k, int) or k < 1:
                raise DistributionError(f"support point {k!r} is not a positive integer")
            if k <= prev:
                raise DistributionError("support must be strictly increasing")
            prev = k
        if any(p <= 0.0 for p in self.probs):
            raise DistributionError("all stored probabilities must be positive")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > _NORMALIZATION_TOL:
            raise DistributionError(f"probabilities sum to {total!r}, not 1")
        if self.truncation_tail < 0.0:
            raise DistributionError("truncation_tail must be non-negative")

    # -- basic queries -------------------------------------------------

    def pmf(self, k: int) -> float:
        idx = bisect_right(self.support, k) - 1
        if idx >= 0 and self.support[idx] == k:
            return self.probs[idx]
        return 0.0

    def survival(self, k: int) -> float:
        """P(Y > k), exact for the stored table."""
        idx = bisect_right(self.support, k)
        return math.fsum(self.probs[idx:])

    @property
    def max_support(self) -> int:
        return self.support[-1]

    @property
    def min_support(self) -> int:
        return self.support[0]

    def param(self, name: str) -> float:
        for key, value in self.params:
            if key == name:
                return value
        raise KeyError(name)

    # -- moments ---------------------------------------------------------

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def variance(self) -> float:
        ks = np.asarray(self.support, dtype=float)
        ps = np.asarray(self.probs, dtype=float)
        mu = float(np.dot(ks, ps))
        return max(0.0, float(np.dot(ks * ks, ps)) - mu * mu)

    def to_json(self) -> dict:
        """Serializable description; see model.save_instance for the format."""
        out: dict = {"kind": self.kind}
        out.update({key: value for key, value in self.params})
        if self.kind == "empirical":
            out["pmf"] = {str(k): p for k, p in zip(self.support, self.probs)}
            if self.truncation_tail:
                out["tail"] = self.truncation_tail
            if self.tag:
                out["tag"] = self.tag
        return out


@dataclass(frozen=True)
class MhrFamilySpec:
    """Explicit hazard-family description for `check_mhr_family`.

    ``base_functions`` are finite tables f[i][k] for k = 0, 1, ..., all
    monotone in ``direction`` ("non-increasing" or "non-decreasing").
    ``assignments`` gives one ``(function_index, shift)`` pair per job, in job
    order; the shift is a non-negative integer.
    """

    base_functions: tuple[tuple[float, ...], ...]
    direction: str
    assignments: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.direction not in ("non-increasing", "non-decreasing"):
            raise DistributionError(f"unknown direction {self.direction!r}")
        if not self.base_functions:
            raise DistributionError("at least one base function is required")
        for table in self.base_functions:
            if not table:
                raise DistributionError("base function table may not be empty")
            if any(not (0.0 <= v <= 1.0) for v in table):
                raise DistributionError("base function values must lie in [0, 1]")
        for idx, shift in self.assignments:
            if not 0 <= idx < len(self.base_functions):
                raise DistributionError(f"function index {idx} out of range")
            if shift < 0:
                raise DistributionError("shifts must be non-negative")


def _build(kind: str, params: Sequence[tuple[str, float]], pmf: Mapping[int, float],
           tail: float, tag: str) -> LoopDistribution:
    ks = tuple(int(k) for k in sorted(pmf))
    ps = tuple(float(pmf[k]) for k in sorted(pmf))
    return LoopDistribution(kind=kind, params=tuple(params), support=ks, probs=ps,
                            truncation_tail=tail, tag=tag)


def geometric(q: float, epsilon: float = DEFAULT_EPSILON) -> LoopDistribution:
    """Loop count with success probability q per loop, support {1, 2, ...}.

    P(Y = k) = q (1-q)^(k-1).  Truncated at the smallest K with
    (1-q)^K <= epsilon; the tail is folded into K.
    """
    if not 0.0 < q <= 1.0:
        raise DistributionError(f"geometric parameter q={q!r} outside (0, 1]")
    _check_epsilon(epsilon)
    tag = f"geometric(q={q})"
    if q == 1.0:
        return _build("geometric", [("q", q), ("epsilon", epsilon)], {1: 1.0}, 0.0, tag)
    cap = math.ceil(math.log(epsilon) / math.log(1.0 - q))
    cap = max(cap, 1)
    pmf = {k: q * (1.0 - q) ** (k - 1) for k in range(1, cap + 1)}
    tail = (1.0 - q) ** cap
    pmf[cap] += tail
    return _build("geometric", [("q", q), ("epsilon", epsilon)], pmf, tail, tag)


def deterministic(loops: int) -> LoopDistribution:
    """Point mass: the job always needs exactly ``loops`` loops."""
    if not isinstance(loops, int) or loops < 1:
        raise DistributionError(f"loop count {loops!r} must be a positive integer")
    return _build("deterministic", [("L", loops)], {loops: 1.0}, 0.0,
                  f"deterministic({loops})")


def negative_binomial(loops: int, q: float,
                      epsilon: float = DEFAULT_EPSILON) -> LoopDistribution:
    """Total loops until ``loops`` successes; a failed loop is repeated.

    Support {loops, loops+1, ...} with
    P(Y = k) = C(k-1, loops-1) q^loops (1-q)^(k-loops), truncated.
    """
    if not isinstance(loops, int) or loops < 1:
        raise DistributionError(f"loop count {loops!r} must be a positive integer")
    if not 0.0 < q <= 1.0:
        raise DistributionError(f"success probability q={q!r} outside (0, 1]")
    _check_epsilon(epsilon)
    params = [("L", loops), ("q", q), ("epsilon", epsilon)]
    tag = f"negbin(L={loops}, q={q})"
    if q == 1.0:
        return _build("negbin", params, {loops: 1.0}, 0.0, tag)
    pmf: dict[int, float] = {}
    p = q ** loops
    cum = 0.0
    k = loops
    while True:
        pmf[k] = p
        cum += p
        if 1.0 - cum <= epsilon:
            break
        p *= (1.0 - q) * k / (k - loops + 1)
        k += 1
    tail = max(0.0, 1.0 - cum)
    pmf[k] += tail
    return _build("negbin", params, pmf, tail, tag)


def consecutive_success(loops: int, q: float,
                        epsilon: float = DEFAULT_EPSILON) -> LoopDistribution:
    """First time of ``loops`` consecutive successful loops; a failure restarts.

    Computed by stepping the absorbing chain on progress states {0, ..., loops}
    until the unabsorbed mass drops to ``epsilon``.
    """
    if not isinstance(loops, int) or loops < 1:
        raise DistributionError(f"loop count {loops!r} must be a positive integer")
    if not 0.0 < q <= 1.0:
        raise DistributionError(f"success probability q={q!r} outside (0, 1]")
    _check_epsilon(epsilon)
    params = [("L", loops), ("q", q), ("epsilon", epsilon)]
    tag = f"consecutive(L={loops}, q={q})"
    if q == 1.0:
        return _build("consecutive", params, {loops: 1.0}, 0.0, tag)
    progress = np.zeros(loops, dtype=float)
    progress[0] = 1.0
    pmf: dict[int, float] = {}
    t = 0
    residual = 1.0
    while residual > epsilon:
        t += 1
        absorbed = q * progress[-1]
        nxt = np.zeros_like(progress)
        nxt[0] = (1.0 - q) * progress.sum()
        nxt[1:] = q * progress[:-1]
        progress = nxt
        if absorbed > 0.0:
            pmf[t] = absorbed
        residual = float(progress.sum())
    last = max(pmf)
    pmf[last] += residual
    return _build("consecutive", params, pmf, residual, tag)


def empirical(table, tag: str = "") -> LoopDistribution:
    """Distribution from an explicit table of (loop count, probability) entries.

    Accepts a mapping or an iterable of pairs; duplicate support points are
    rejected.  Entries must have k >= 1 and p > 0 and sum to 1 within 1e-9;
    the stored table is renormalized exactly.
    """
    if isinstance(table, Mapping):
        pairs = list(table.items())
    else:
        pairs = list(table)
    pmf: dict[int, float] = {}
    for k, p in pairs:
        if not isinstance(k, (int, np.integer)) or k < 1:
            raise DistributionError(f"support point {k!r} is not a positive integer")
        k = int(k)
        if not p > 0.0:
            raise DistributionError(f"probability for {k} must be positive, got {p!r}")
        if k in pmf:
            raise DistributionError(f"duplicate support point {k}")
        pmf[k] = float(p)
    if not pmf:
        raise DistributionError("empty probability table")
    total = math.fsum(pmf.values())
    if abs(total - 1.0) > _EMPIRICAL_SUM_TOL:
        raise DistributionError(f"probabilities sum to {total!r}, not 1")
    pmf = {k: p / total for k, p in pmf.items()}
    return _build("empirical", [], pmf, 0.0, tag or "empirical")


def truncate(dist: LoopDistribution, epsilon: float) -> LoopDistribution:
    """Fold tail mass beyond the smallest K with P(Y > K) <= epsilon into K."""
    _check_epsilon(epsilon)
    suffix = 0.0
    cut = len(dist.support)
    for idx in range(len(dist.support) - 1, -1, -1):
        if suffix + dist.probs[idx] > epsilon:
            break
        suffix += dist.probs[idx]
        cut = idx
    if cut >= len(dist.support):
        return dist
    if cut == 0:
        cut = 1  # keep at least one support point
        suffix = math.fsum(dist.probs[1:])
    ks = dist.support[:cut]
    ps = list(dist.probs[:cut])
    ps[-1] += suffix
    return LoopDistribution(kind="empirical", params=(), support=ks, probs=tuple(ps),
                            truncation_tail=dist.truncation_tail + suffix,
                            tag=dist.tag)


def hazard(dist: LoopDistribution, k: int) -> float:
    """P(Y = k+1 | Y > k) for loops-completed count k >= 0."""
    if k < 0:
        raise DistributionError("loops-completed count must be non-negative")
    surv = dist.survival(k)
    if surv <= 0.0:
        raise UndefinedHazardError(f"P(Y > {k}) = 0")
    return dist.pmf(k + 1) / surv


def cond_remaining_mean(dist: LoopDistribution, k: int) -> float:
    """E[Y - k | Y > k] for loops-completed count k >= 0."""
    if k < 0:
        raise DistributionError("loops-completed count must be non-negative")
    idx = bisect_right(dist.support, k)
    surv = math.fsum(dist.probs[idx:])
    if surv <= 0.0:
        raise UndefinedHazardError(f"P(Y > {k}) = 0")
    weighted = math.fsum(y * p for y, p in zip(dist.support[idx:], dist.probs[idx:]))
    return weighted / surv - k


def scv(dist: LoopDistribution) -> float:
    """Squared coefficient of variation Var[Y] / E[Y]^2."""
    mu = dist.mean()
    if mu <= 0.0:
        raise DistributionError("mean must be positive")
    return dist.variance() / (mu * mu)


def is_nbue(dist: LoopDistribution, tol: float = 1e-9) -> bool:
    """True iff E[Y - x | Y > x] <= E[Y] + tol wherever the condition has mass."""
    mu = dist.mean()
    for x in range(dist.max_support):
        if cond_remaining_mean(dist, x) > mu + tol:
            return False
    return True


def check_mhr_family(dists: Sequence[LoopDistribution], spec: MhrFamilySpec,
                     tol: float = 1e-9) -> bool:
    """Verify an explicit monotone-hazard family description.

    Checks, in order: common monotonicity of the base tables, range separation
    (sup of f_i over k >= 1 strictly below inf of f_{i+1} over k >= 1), and the
    per-job identity  P(Y_j = k | Y_j >= k) = f_{i(j)}(x_j + k)  for every loop
    index k = 1, ..., max support of job j.  Returns False when a condition
    fails; raises InsufficientTableError when a base table is too short to
    evaluate.
    """
    if len(dists) != len(spec.assignments):
        raise DistributionError("one assignment per distribution is required")
    sign = 1.0 if spec.direction == "non-decreasing" else -1.0
    for table in spec.base_functions:
        for a, b in zip(table, table[1:]):
            if sign * (b - a) < -tol:
                return False
    ranges = []
    for table in spec.base_functions:
        tail = table[1:] if len(table) > 1 else table
        ranges.append((min(tail), max(tail)))
    for (_, hi), (lo, _) in zip(ranges, ranges[1:]):
        if not hi < lo:
            return False
    for dist, (idx, shift) in zip(dists, spec.assignments):
        table = spec.base_functions[idx]
        # A folded tail forces the last stored hazard to 1; that point is a
        # truncation artifact, not a property of the underlying family.
        upper = dist.max_support if dist.truncation_tail == 0.0 else dist.max_support - 1
        for k in range(1, upper + 1):
            if shift + k >= len(table):
                raise InsufficientTableError(
                    f"table {idx} has {len(table)} entries, needs index {shift + k}")
            if abs(hazard(dist, k - 1) - table[shift + k]) > tol:
                return False
    return True


def sample(dist: LoopDistribution, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from the stored table."""
    u = rng.random()
    cdf = np.cumsum(dist.probs)
    idx = int(np.searchsorted(cdf, u, side="right"))
    idx = min(idx, len(dist.support) - 1)
    return dist.support[idx]


def sample_many(dist: LoopDistribution, rng: np.random.Generator,
                size: int) -> np.ndarray:
    """Vectorized inverse-CDF draws from the stored table."""
    u = rng.random(size)
    cdf = np.cumsum(dist.probs)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(dist.support) - 1)
    return np.asarray(dist.support, dtype=np.int64)[idx]


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise DistributionError(f"truncation tail epsilon={epsilon!r} outside (0, 1)")
