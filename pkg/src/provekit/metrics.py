"""pass@k estimation and aggregation across runs."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

# Above this sample count the product form switches to log space.
_LOG_SPACE_THRESHOLD = 10_000


@dataclass(frozen=True)
class PassAtKInput:
    n: int
    c: int
    k: int

    def __post_init__(self):
        if not (0 <= self.c <= self.n):
            raise DomainError(f"c={self.c} outside [0, n={self.n}]")
        if not (1 <= self.k <= self.n):
            raise DomainError(f"k={self.k} outside [1, n={self.n}]")


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimate 1 - C(n-c, k) / C(n, k), computed without factorials."""
    PassAtKInput(n, c, k)  # validates
    if c == 0:
        return 0.0
    if k == 1:
        return c / n
    if n - c < k:
        return 1.0
    # C(n-c, k)/C(n, k) = prod_{i=0}^{k-1} (n-c-i)/(n-i)
    if n <= _LOG_SPACE_THRESHOLD:
        ratio = 1.0
        for i in range(k):
            ratio *= (n - c - i) / (n - i)
        return 1.0 - ratio
    log_ratio = sum(math.log(n - c - i) - math.log(n - i) for i in range(k))
    return 1.0 - math.exp(log_ratio)


def scaling_curve(results: list[tuple[int, int]], ks: list[int]) -> list[tuple[int, float]]:
    """Mean pass@k over statements for each k; `results` holds (n, c) pairs."""
    if not results:
        raise DomainError("no results to aggregate")
    max_k = max(ks)
    for n, _ in results:
        if n < max_k:
            raise DomainError(f"n={n} < max requested k={max_k}")
    out = []
    for k in ks:
        out.append((k, sum(pass_at_k(n, c, k) for n, c in results) / len(results)))
    return out


def aggregate_with_stderr(rates: list[float]) -> tuple[float, float | None]:
    """Mean and sample standard error over repeated runs; one run has no stderr."""
    if not rates:
        raise DomainError("no runs to aggregate")
    m = len(rates)
    mean = sum(rates) / m
    if m < 2:
        return mean, None
    var = sum((r - mean) ** 2 for r in rates) / (m - 1)
    return mean, math.sqrt(var / m)
