"""Rank-correlation meta-analysis: Pearson, Spearman, Kendall tau-b.

Score vectors are aligned by unit id (model name or sample id), never by
position. With the tiny per-model samples this tool targets (n around 5),
asymptotic p-values are unreliable, so Kendall significance is computed by
exact permutation enumeration up to n = 8.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from scipy import stats as _sps

PERMUTATION_MAX_N = 8
# Significance bands: p < 0.05 -> *, < 0.01 -> **, < 0.001 -> ***.
_STAR_THRESHOLDS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))

METHODS = ("pearson", "spearman", "kendall")


class StatsError(ValueError):
    """Base for correlation/aggregation failures."""


class ConstantVector(StatsError):
    pass


class Misaligned(StatsError):
    pass


class TooFewSamples(StatsError):
    pass


class EmptyInput(StatsError):
    pass


@dataclass(frozen=True)
class ScoreVector:
    """Labelled scores keyed by unit ids (one value per unit)."""

    label: str
    values: tuple[float, ...]
    unit_ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) != len(self.unit_ids):
            raise ValueError("values and unit_ids must have equal length")
        if len(set(self.unit_ids)) != len(self.unit_ids):
            raise ValueError(f"duplicate unit ids in vector {self.label!r}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    p_value: float
    method: str
    n: int
    stars: str
    p_method: str


@dataclass(frozen=True)
class AggregateCell:
    mean: float
    std: float
    n: int
    precision: int = 2

    def render(self, precision: int | None = None) -> str:
        p = self.precision if precision is None else precision
        return f"{_fmt(self.mean, p)}({_fmt(self.std, p)})"


def _fmt(value: float, precision: int) -> str:
    # Round, then trim trailing zeros but keep one decimal: 4.00 -> "4.0".
    s = f"{value:.{precision}f}"
    if "." in s:
        s = s.rstrip("0")
        if s.endswith("."):
            s += "0"
    return s


def stars_for(p_value: float) -> str:
    for threshold, stars in _STAR_THRESHOLDS:
        if p_value < threshold:
            return stars
    return ""


def align(x: ScoreVector, y: ScoreVector) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Pair values by unit id; both vectors must cover the same unit set."""
    if set(x.unit_ids) != set(y.unit_ids):
        raise Misaligned(f"unit ids of {x.label!r} and {y.label!r} differ")
    y_by_id = dict(zip(y.unit_ids, y.values))
    return x.values, tuple(y_by_id[u] for u in x.unit_ids)


def _check_pair(x: ScoreVector, y: ScoreVector) -> tuple[tuple[float, ...], tuple[float, ...]]:
    xs, ys = align(x, y)
    if len(xs) < 3:
        raise TooFewSamples(f"need n >= 3, got {len(xs)}")
    if len(set(xs)) < 2:
        raise ConstantVector(f"vector {x.label!r} is constant")
    if len(set(ys)) < 2:
        raise ConstantVector(f"vector {y.label!r} is constant")
    return xs, ys


def _pearson_coefficient(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(xs, ys))
    sxx = math.fsum((a - mx) ** 2 for a in xs)
    syy = math.fsum((b - my) ** 2 for b in ys)
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _t_approx_pvalue(r: float, n: int) -> float:
    if 1 - r * r <= 0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return float(2 * _sps.t.sf(abs(t), df=n - 2))


def pearson(x: ScoreVector, y: ScoreVector) -> CorrelationResult:
    """Product-moment correlation with a two-sided t-approximation p-value."""
    xs, ys = _check_pair(x, y)
    r = _pearson_coefficient(xs, ys)
    p = _t_approx_pvalue(r, len(xs))
    return CorrelationResult(r, p, "pearson", len(xs), stars_for(p), "t_approx")


def mean_ranks(values: Sequence[float]) -> list[float]:
    """Average ranks (1-based); tied values share the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def spearman(x: ScoreVector, y: ScoreVector) -> CorrelationResult:
    """Pearson over mean ranks; p via the same t approximation on ranks."""
    xs, ys = _check_pair(x, y)
    rho = _pearson_coefficient(mean_ranks(xs), mean_ranks(ys))
    p = _t_approx_pvalue(rho, len(xs))
    return CorrelationResult(rho, p, "spearman", len(xs), stars_for(p), "t_approx")


def _concordance(xs: Sequence[float], ys: Sequence[float]) -> int:
    """S = concordant minus discordant pairs."""
    s = 0
    n = len(xs)
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            prod = dx * dy
            if prod > 0:
                s += 1
            elif prod < 0:
                s -= 1
    return s


def _tie_term(values: Sequence[float]) -> int:
    return sum(t * (t - 1) // 2 for t in Counter(values).values())


def _tau_b(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, int]:
    n = len(xs)
    n0 = n * (n - 1) // 2
    s = _concordance(xs, ys)
    denom = math.sqrt((n0 - _tie_term(xs)) * (n0 - _tie_term(ys)))
    return s / denom, s


def _tau_permutation_pvalue(xs: Sequence[float], ys: Sequence[float], s_obs: int) -> float:
    """Two-sided exact p over all n! orderings of y.

    Tie structures are permutation-invariant, so comparing |S| is
    equivalent to comparing |tau-b|.
    """
    n = len(xs)
    hits = 0
    total = 0
    for perm in itertools.permutations(ys):
        total += 1
        if abs(_concordance(xs, perm)) >= abs(s_obs):
            hits += 1
    return hits / total


def _tau_normal_pvalue(xs: Sequence[float], ys: Sequence[float], s: int) -> float:
    # Tie-adjusted variance of S (the standard tau-b asymptotic form).
    n = len(xs)
    tx = [t for t in Counter(xs).values() if t > 1]
    ty = [t for t in Counter(ys).values() if t > 1]
    v0 = n * (n - 1) * (2 * n + 5)
    vt = sum(t * (t - 1) * (2 * t + 5) for t in tx)
    vu = sum(t * (t - 1) * (2 * t + 5) for t in ty)
    v1 = sum(t * (t - 1) for t in tx) * sum(t * (t - 1) for t in ty) / (2 * n * (n - 1))
    v2 = (
        sum(t * (t - 1) * (t - 2) for t in tx)
        * sum(t * (t - 1) * (t - 2) for t in ty)
        / (9 * n * (n - 1) * (n - 2))
    )
    var = (v0 - vt - vu) / 18 + v1 + v2
    if var <= 0:
        return 0.0
    return float(2 * _sps.norm.sf(abs(s) / math.sqrt(var)))


def kendall_tau_b(x: ScoreVector, y: ScoreVector) -> CorrelationResult:
    """Tie-corrected Kendall tau-b; exact permutation p for n <= 8."""
    xs, ys = _check_pair(x, y)
    tau, s = _tau_b(xs, ys)
    if len(xs) <= PERMUTATION_MAX_N:
        p = _tau_permutation_pvalue(xs, ys, s)
        p_method = "exact_permutation"
    else:
        p = _tau_normal_pvalue(xs, ys, s)
        p_method = "normal_approx"
    return CorrelationResult(tau, p, "kendall_tau_b", len(xs), stars_for(p), p_method)


_METHOD_FUNCS = {"pearson": pearson, "spearman": spearman, "kendall": kendall_tau_b}


def correlate(x: ScoreVector, y: ScoreVector, method: str) -> CorrelationResult:
    try:
        fn = _METHOD_FUNCS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}") from None
    return fn(x, y)


def aggregate(per_sample_scores: Sequence[float], precision: int = 2) -> AggregateCell:
    """Mean and sample (n-1) standard deviation; std is 0 for a single value."""
    values = list(per_sample_scores)
    if not values:
        raise EmptyInput("aggregate needs at least one score")
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1:
        std = 0.0
    else:
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    return AggregateCell(mean=mean, std=std, n=n, precision=precision)


@dataclass(frozen=True)
class MatrixCell:
    result: CorrelationResult | None
    error: str | None = None

    def render(self) -> str:
        if self.error is not None:
            return f"n/a[{self.error}]"
        assert self.result is not None
        return f"{_fmt(self.result.coefficient, 3)}{self.result.stars}"


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    cells: tuple[tuple[MatrixCell, ...], ...]
    method: str

    def cell(self, row_label: str, col_label: str) -> MatrixCell:
        i = self.labels.index(row_label)
        j = self.labels.index(col_label)
        return self.cells[i][j]

    def to_text(self) -> str:
        """Aligned text table: one row/column per vector label."""
        col0 = max(len(lbl) for lbl in self.labels)
        rendered = [[cell.render() for cell in row] for row in self.cells]
        widths = [max(len(self.labels[j]), max(len(rendered[i][j]) for i in range(len(self.labels)))) for j in range(len(self.labels))]
        lines = [" " * col0 + "  " + "  ".join(lbl.ljust(widths[j]) for j, lbl in enumerate(self.labels))]
        for i, lbl in enumerate(self.labels):
            lines.append(lbl.ljust(col0) + "  " + "  ".join(rendered[i][j].ljust(widths[j]) for j in range(len(self.labels))))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["x", "y", "method", "coefficient", "p_value", "n", "stars", "p_method", "error"])
        for i, row_label in enumerate(self.labels):
            for j, col_label in enumerate(self.labels):
                c = self.cells[i][j]
                if c.error is not None:
                    writer.writerow([row_label, col_label, self.method, "", "", "", "", "", c.error])
                else:
                    r = c.result
                    writer.writerow([row_label, col_label, r.method, repr(r.coefficient), repr(r.p_value), r.n, r.stars, r.p_method, ""])
        return buf.getvalue()


def correlation_matrix(vectors: Sequence[ScoreVector], method: str) -> CorrelationMatrix:
    """All-pairs correlation; per-pair failures become in-cell markers."""
    if len(vectors) < 2:
        raise StatsError("correlation_matrix needs at least two vectors")
    n = len(vectors)
    rows: list[tuple[MatrixCell, ...]] = []
    cache: dict[tuple[int, int], MatrixCell] = {}
    for i in range(n):
        row: list[MatrixCell] = []
        for j in range(n):
            key = (min(i, j), max(i, j))
            if key not in cache:
                try:
                    cache[key] = MatrixCell(result=correlate(vectors[key[0]], vectors[key[1]], method))
                except StatsError as exc:
                    cache[key] = MatrixCell(result=None, error=type(exc).__name__)
            row.append(cache[key])
        rows.append(tuple(row))
    return CorrelationMatrix(tuple(v.label for v in vectors), tuple(rows), method)
