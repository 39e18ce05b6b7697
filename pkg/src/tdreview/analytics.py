"""Corpus-level TD analyses: distribution, Spearman correlation, yearly trend,
compound annual growth and the growth-vs-influence bubble data."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .corpus import TD_TYPES, parse_timestamp
from .errors import ConstantVectorError, LengthMismatchError, MissingYearError, UndefinedCagrError

OVERALL = "overall"


def _field(inst, name: str):
    return inst[name] if isinstance(inst, Mapping) else getattr(inst, name)


def _type_of(inst) -> str:
    if isinstance(inst, Mapping):
        return inst.get("type") or inst["td_type"]
    return inst.td_type


def _year_of(inst) -> int:
    return parse_timestamp(_field(inst, "created_at")).year


# ---------------------------------------------------------------------------
# distribution


@dataclass
class DistributionTable:
    """scope -> type -> (count, percentage); scopes are platforms plus "overall"."""

    scopes: dict[str, dict[str, tuple[int, float]]]

    def to_dict(self) -> dict:
        return {s: {t: {"count": c, "percent": p} for t, (c, p) in row.items()} for s, row in self.scopes.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scope", "type", "count", "percent"])
        for scope, row in self.scopes.items():
            for t, (c, p) in row.items():
                w.writerow([scope, t, c, f"{p:.4f}"])
        return buf.getvalue()


def _percent_row(counts: Counter, types: Sequence[str]) -> dict[str, tuple[int, float]]:
    total = sum(counts[t] for t in types)
    return {t: (counts[t], 100.0 * counts[t] / total if total else 0.0) for t in types}


def distribution(instances: Iterable, types: Sequence[str] = TD_TYPES) -> DistributionTable:
    per_platform: dict[str, Counter] = defaultdict(Counter)
    pooled: Counter = Counter()
    for inst in instances:
        t = _type_of(inst)
        per_platform[_field(inst, "platform") or "unknown"][t] += 1
        pooled[t] += 1
    scopes = {p: _percent_row(per_platform[p], types) for p in sorted(per_platform)}
    scopes[OVERALL] = _percent_row(pooled, types)
    return DistributionTable(scopes)


def distribution_from_counts(counts_by_platform: Mapping[str, Mapping[str, int]], types: Sequence[str] = TD_TYPES) -> DistributionTable:
    """Same table built directly from per-platform counts."""
    pooled: Counter = Counter()
    scopes = {}
    for platform in sorted(counts_by_platform):
        c = Counter(counts_by_platform[platform])
        pooled.update(c)
        scopes[platform] = _percent_row(c, types)
    scopes[OVERALL] = _percent_row(pooled, types)
    return DistributionTable(scopes)


# ---------------------------------------------------------------------------
# correlation


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman's rho: Pearson correlation of average ranks (exact under ties)."""
    if len(x) != len(y):
        raise LengthMismatchError(f"{len(x)} vs {len(y)} values")
    if len(x) < 3:
        raise ValueError("spearman needs at least 3 observations")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    dx, dy = rx - rx.mean(), ry - ry.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ConstantVectorError("rank correlation undefined for a constant vector")
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


@dataclass
class CorrelationMatrix:
    labels: list[str]
    values: np.ndarray
    undefined: list[tuple[str, str]] = field(default_factory=list)

    def row_mean(self, label: str) -> float:
        """Mean off-diagonal correlation of one type, skipping undefined cells."""
        i = self.labels.index(label)
        row = [self.values[i, j] for j in range(len(self.labels)) if j != i and not np.isnan(self.values[i, j])]
        return float(np.mean(row)) if row else 0.0

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "values": [[None if np.isnan(v) else float(v) for v in row] for row in self.values],
            "undefined": [list(p) for p in self.undefined],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + self.labels)
        for lab, row in zip(self.labels, self.values):
            w.writerow([lab] + ["" if np.isnan(v) else f"{v:.6f}" for v in row])
        return buf.getvalue()


def correlation_matrix(per_package_counts: Mapping[str, Mapping[str, int]], types: Sequence[str] = TD_TYPES) -> CorrelationMatrix:
    packages = sorted(per_package_counts)
    if len(packages) < 3:
        raise ValueError("correlation needs at least 3 packages")
    vectors = {t: [float(per_package_counts[p].get(t, 0)) for p in packages] for t in types}
    n = len(types)
    R = np.eye(n)
    undefined = []
    for i in range(n):
        for j in range(i + 1, n):
            try:
                R[i, j] = R[j, i] = spearman(vectors[types[i]], vectors[types[j]])
            except ConstantVectorError:
                R[i, j] = R[j, i] = np.nan
                undefined.append((types[i], types[j]))
    return CorrelationMatrix(list(types), R, undefined)


def counts_per_package(instances: Iterable) -> dict[str, dict[str, int]]:
    out: dict[str, Counter] = defaultdict(Counter)
    for inst in instances:
        out[_field(inst, "package")][_type_of(inst)] += 1
    return {p: dict(c) for p, c in out.items()}


# ---------------------------------------------------------------------------
# trend and growth


@dataclass
class TrendSeries:
    """type -> [(year, average instances per package)], years ascending."""

    series: dict[str, list[tuple[int, float]]]

    def value(self, td_type: str, year: int) -> float:
        for y, v in self.series[td_type]:
            if y == year:
                return v
        raise MissingYearError(year)

    def to_dict(self) -> dict:
        return {t: [{"year": y, "per_package": v} for y, v in pts] for t, pts in self.series.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["type", "year", "per_package"])
        for t, pts in self.series.items():
            for y, v in pts:
                w.writerow([t, y, repr(v)])
        return buf.getvalue()


def packages_by_year(comments: Iterable, cumulative: bool = True) -> dict[int, int]:
    """Packages per year, a package dated by its earliest comment.

    ``cumulative`` counts every package reviewed up to and including the year.
    """
    first: dict[str, int] = {}
    for c in comments:
        y = _year_of(c)
        pkg = _field(c, "package")
        first[pkg] = min(y, first.get(pkg, y))
    per_year = Counter(first.values())
    if not per_year:
        return {}
    years = range(min(per_year), max(per_year) + 1)
    if not cumulative:
        return {y: per_year[y] for y in years if per_year[y]}
    out, running = {}, 0
    for y in years:
        running += per_year[y]
        out[y] = running
    return out


def trend(instances: Iterable, packages_by_year: Mapping[int, int], types: Sequence[str] = TD_TYPES) -> TrendSeries:
    per_year: dict[int, Counter] = defaultdict(Counter)
    for inst in instances:
        per_year[_year_of(inst)][_type_of(inst)] += 1
    pby = {int(y): int(n) for y, n in packages_by_year.items()}
    for y in per_year:
        if pby.get(y, 0) <= 0:
            raise MissingYearError(y)
    years = sorted(pby)
    return TrendSeries({t: [(y, per_year[y][t] / pby[y]) for y in years if pby[y] > 0] for t in types})


@dataclass
class GrowthStats:
    """type -> (delta_occurrence, cagr_percent or None when undefined)."""

    rows: dict[str, tuple[float, float | None]]
    first_year: int
    last_year: int

    def to_dict(self) -> dict:
        return {
            "first_year": self.first_year,
            "last_year": self.last_year,
            "types": {t: {"delta_occurrence": d, "cagr_percent": g, "cagr_defined": g is not None} for t, (d, g) in self.rows.items()},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["type", "delta_occurrence", "cagr_percent"])
        for t, (d, g) in self.rows.items():
            w.writerow([t, repr(d), "" if g is None else repr(g)])
        return buf.getvalue()


def cagr_percent(first: float, last: float, years: int) -> float:
    if first <= 0:
        raise UndefinedCagrError(f"CAGR undefined for starting value {first}")
    if years < 1:
        raise ValueError("CAGR needs a span of at least one year")
    return 100.0 * ((last / first) ** (1.0 / years) - 1.0)


def growth(series: TrendSeries, first_year: int, last_year: int) -> GrowthStats:
    span = last_year - first_year
    if span < 1:
        raise ValueError("last_year must follow first_year")
    rows = {}
    for t in series.series:
        v0, v1 = series.value(t, first_year), series.value(t, last_year)
        try:
            g = cagr_percent(v0, v1, span)
        except UndefinedCagrError:
            g = None
        rows[t] = (v1 - v0, g)
    return GrowthStats(rows, first_year, last_year)


# Published 2016-2020 pooled growth values; display fixture, not recomputed.
REFERENCE_GROWTH = {
    "documentation": (2.14, 5.41),
    "build": (0.45, 3.78),
    "requirement": (0.61, 3.42),
    "architecture": (-0.75, -7.15),
    "design": (0.17, 0.52),
    "usability": (0.05, 1.77),
    "code": (0.74, 3.82),
    "versioning": (-0.03, -5.58),
    "test": (1.28, 15.05),
    "defect": (1.24, 5.84),
}


# ---------------------------------------------------------------------------
# impact


@dataclass(frozen=True)
class ImpactPoint:
    td_type: str
    growth_percent: float | None
    mean_correlation: float
    size: int


def impact(growth_stats: GrowthStats, corr: CorrelationMatrix, totals: Mapping[str, int]) -> list[ImpactPoint]:
    """Bubble-chart rows: x = CAGR %, y = mean off-diagonal rho, size = total count."""
    types = list(corr.labels)
    if set(types) != set(growth_stats.rows) or set(totals) - set(types):
        raise ValueError("growth, correlation and totals must cover the same types")
    return [ImpactPoint(t, growth_stats.rows[t][1], corr.row_mean(t), int(totals.get(t, 0))) for t in types]


def impact_to_csv(points: Sequence[ImpactPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["type", "x_growth_percent", "y_mean_correlation", "size"])
    for p in points:
        w.writerow([p.td_type, "" if p.growth_percent is None else repr(p.growth_percent), repr(p.mean_correlation), p.size])
    return buf.getvalue()


def impact_to_dict(points: Sequence[ImpactPoint]) -> list[dict]:
    return [{"type": p.td_type, "x": p.growth_percent, "y": p.mean_correlation, "size": p.size} for p in points]
