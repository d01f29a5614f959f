"""Ranking-validity statistics over model-by-dataset accuracy tables.

Accuracy tables arrive as external files; nothing here trains models.
Ties are reported, never silently broken: rank agreement falls back to the
tie-aware tau variant only when ties exist.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .errors import InputError, ValidationError


class UnknownColumn(ValidationError):
    pass


class UnknownModel(ValidationError):
    pass


class SetMismatch(ValidationError):
    pass


class ZeroBaseline(ValidationError):
    pass


class DegenerateInput(ValidationError):
    pass


@dataclass(frozen=True)
class AccuracyTable:
    """Ordered model list plus named accuracy columns aligned to it."""

    models: tuple[str, ...]
    columns: dict[str, tuple[float, ...]]

    def __post_init__(self):
        if len(set(self.models)) != len(self.models):
            raise ValidationError("duplicate model names")
        for name, values in self.columns.items():
            if len(values) != len(self.models):
                raise ValidationError(f"column {name!r} is not aligned to the model list")
            for value in values:
                if not 0.0 <= value <= 1.0:
                    raise ValidationError(f"accuracy out of [0, 1] in column {name!r}: {value}")

    def column(self, name: str) -> tuple[float, ...]:
        try:
            return self.columns[name]
        except KeyError:
            raise UnknownColumn(name) from None

    def accuracy(self, model: str, column: str) -> float:
        try:
            index = self.models.index(model)
        except ValueError:
            raise UnknownModel(model) from None
        return self.column(column)[index]

    @classmethod
    def read(cls, path: Path | str) -> "AccuracyTable":
        """Parse a tab-separated table: header `model<TAB>col...`, one row per model."""
        path = Path(path)
        if not path.is_file():
            raise InputError(f"accuracy table not found: {path}")
        lines = [
            line.rstrip("\n")
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if not lines:
            raise ValidationError(f"{path.name}: empty table")
        header = lines[0].split("\t")
        if len(header) < 2:
            raise ValidationError(f"{path.name}: header needs a model column plus data columns")
        column_names = header[1:]
        models: list[str] = []
        data: list[list[float]] = [[] for _ in column_names]
        for lineno, line in enumerate(lines[1:], 2):
            fields = line.split("\t")
            if len(fields) != len(header):
                raise ValidationError(f"{path.name}:{lineno}: expected {len(header)} fields")
            models.append(fields[0])
            for i, raw in enumerate(fields[1:]):
                try:
                    data[i].append(float(raw))
                except ValueError:
                    raise ValidationError(f"{path.name}:{lineno}: bad accuracy {raw!r}") from None
        return cls(
            models=tuple(models),
            columns={name: tuple(values) for name, values in zip(column_names, data)},
        )


def ranking(table: AccuracyTable, column: str) -> tuple[tuple[str, ...], tuple[tuple[str, ...], ...]]:
    """Models sorted by accuracy descending; exact ties keep table order.

    Returns (ordering, tie_groups) where tie_groups lists every group of
    models sharing an accuracy value, in ranking order.
    """
    values = table.column(column)
    order = sorted(range(len(table.models)), key=lambda i: -values[i])
    ordering = tuple(table.models[i] for i in order)
    groups: list[tuple[str, ...]] = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        if j > i:
            groups.append(tuple(table.models[k] for k in order[i : j + 1]))
        i = j + 1
    return ordering, tuple(groups)


def _count_inversions(sequence: list[int]) -> int:
    """Merge-sort inversion count."""
    if len(sequence) < 2:
        return 0
    mid = len(sequence) // 2
    left, right = sequence[:mid], sequence[mid:]
    count = _count_inversions(left) + _count_inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            count += len(left) - i
            merged.append(right[j])
            j += 1
    sequence[:] = merged + left[i:] + right[j:]
    return count


def kendall_tau(order_a: Sequence[str], order_b: Sequence[str]) -> float:
    """Plain Kendall tau between two orderings: 1 - 2*discordant / (n(n-1)/2)."""
    if len(set(order_a)) != len(order_a) or len(set(order_b)) != len(order_b):
        raise SetMismatch("orderings must not repeat items")
    if set(order_a) != set(order_b):
        raise SetMismatch("orderings cover different item sets")
    n = len(order_a)
    if n < 2:
        return 1.0
    position = {item: i for i, item in enumerate(order_b)}
    discordant = _count_inversions([position[item] for item in order_a])
    return 1.0 - 2.0 * discordant / (n * (n - 1) / 2)


def kendall_tau_values(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-aware tau (tau-b) over paired value vectors."""
    if len(x) != len(y):
        raise SetMismatch("paired vectors differ in length")
    n = len(x)
    if n < 2:
        return 1.0
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    denom = math.sqrt(
        (concordant + discordant + ties_x) * (concordant + discordant + ties_y)
    )
    if denom == 0:
        raise DegenerateInput("tau-b undefined: one vector is constant")
    return (concordant - discordant) / denom


def average_ranks(values: Sequence[float]) -> list[float]:
    """Ranks 1..n ascending by value; tied values share their average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise SetMismatch("paired vectors differ in length")
    return linear_fit(average_ranks(x), average_ranks(y)).pearson_r


def relative_improvement(table: AccuracyTable, column: str, baseline: str) -> dict[str, float]:
    """Per-model ratio accuracy / baseline accuracy for one column.

    Ratios are computed in exact decimal arithmetic over the shortest float
    representation, so e.g. 0.60 / 0.40 is exactly 1.5.
    """
    values = table.column(column)
    base = table.accuracy(baseline, column)
    if base == 0.0:
        raise ZeroBaseline(f"baseline {baseline!r} has zero accuracy in {column!r}")
    base_fraction = Fraction(repr(base))
    return {
        model: float(Fraction(repr(value)) / base_fraction)
        for model, value in zip(table.models, values)
    }


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    pearson_r: float


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Least-squares line plus Pearson correlation.

    Constant y gives slope 0 and pearson_r NaN; constant x is degenerate.
    """
    if len(x) != len(y):
        raise DegenerateInput("x and y differ in length")
    if len(x) < 2:
        raise DegenerateInput("need at least 2 points")
    n = len(x)
    mean_x = math.fsum(x) / n
    mean_y = math.fsum(y) / n
    ss_x = math.fsum((xi - mean_x) ** 2 for xi in x)
    ss_y = math.fsum((yi - mean_y) ** 2 for yi in y)
    if ss_x == 0.0:
        raise DegenerateInput("x is constant; fit undefined")
    cov = math.fsum((xi - mean_x) * (yi - mean_y) for xi, yi in zip(x, y))
    slope = cov / ss_x
    intercept = mean_y - slope * mean_x
    pearson = cov / math.sqrt(ss_x * ss_y) if ss_y > 0.0 else float("nan")
    return LinearFit(slope=slope, intercept=intercept, pearson_r=pearson)


@dataclass(frozen=True)
class RankReport:
    """Paired-column agreement report: orderings, rank stats, and the fit."""

    x_column: str
    y_column: str
    baseline: str | None
    mode: str  # "relative" or "absolute"
    models: tuple[str, ...]
    points: tuple[tuple[str, float, float], ...]
    ordering: dict[str, tuple[str, ...]]
    ties: dict[str, tuple[tuple[str, ...], ...]]
    exact_match: bool
    kendall_tau: float
    tau_variant: str  # "plain" or "tie-aware"
    spearman_rho: float
    relative: dict[str, dict[str, float]] | None
    fit: LinearFit


def compare_protocols(
    table: AccuracyTable, x_column: str, y_column: str, baseline: str | None = None
) -> RankReport:
    """Full agreement report between two accuracy columns.

    With a baseline the scatter is in relative-improvement space; rank
    statistics are identical either way because ratios are a positive
    rescaling of each column.
    """
    x_values = table.column(x_column)
    y_values = table.column(y_column)
    order_x, ties_x = ranking(table, x_column)
    order_y, ties_y = ranking(table, y_column)
    has_ties = bool(ties_x or ties_y)
    if has_ties:
        tau = kendall_tau_values(x_values, y_values)
        tau_variant = "tie-aware"
    else:
        tau = kendall_tau(order_x, order_y)
        tau_variant = "plain"
    relative = None
    if baseline is not None:
        relative = {
            x_column: relative_improvement(table, x_column, baseline),
            y_column: relative_improvement(table, y_column, baseline),
        }
        points = tuple(
            (model, relative[x_column][model], relative[y_column][model])
            for model in table.models
        )
    else:
        points = tuple(zip(table.models, x_values, y_values))
    fit = linear_fit([p[1] for p in points], [p[2] for p in points])
    return RankReport(
        x_column=x_column,
        y_column=y_column,
        baseline=baseline,
        mode="relative" if baseline is not None else "absolute",
        models=table.models,
        points=points,
        ordering={x_column: order_x, y_column: order_y},
        ties={x_column: ties_x, y_column: ties_y},
        exact_match=order_x == order_y,
        kendall_tau=tau,
        tau_variant=tau_variant,
        spearman_rho=spearman_rho(x_values, y_values),
        relative=relative,
        fit=fit,
    )


def render_rank_report(report: RankReport, csv: bool = False) -> str:
    """Line-delimited report: summary comments plus one row per model."""
    sep = "," if csv else "\t"
    lines = [
        f"# rank-report x={report.x_column} y={report.y_column} mode={report.mode}",
        f"# exact_match={report.exact_match}",
        f"# kendall_tau={report.kendall_tau!r} variant={report.tau_variant}",
        f"# spearman_rho={report.spearman_rho!r}",
        f"# fit slope={report.fit.slope!r} intercept={report.fit.intercept!r}"
        f" pearson_r={report.fit.pearson_r!r}",
    ]
    for column, groups in report.ties.items():
        for group in groups:
            lines.append(f"# tie {column}: {' '.join(group)}")
    lines.append(sep.join(("model", report.x_column, report.y_column)))
    for model, x, y in report.points:
        lines.append(sep.join((model, repr(x), repr(y))))
    return "\n".join(lines) + "\n"
