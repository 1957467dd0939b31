"""Aggregate views over snapshots: prevalence, leak counts, HSTS posture,
and the smell-count vs maintenance-scenario matrix.

All aggregations are pure tabulations over stored findings; display
percentages round half-up to integers while machine output keeps full
precision.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path

from .corpus import DeclaredFormat, ProbeTarget, SourceModel
from .maintenance import MaintenanceRecord, MaintenanceScenario
from .probe import BodyFormat, ProbeResult, Scheme
from .smells import LeakCategory, SmellKind
from .snapshot import Snapshot
from .versions import OS_DICTIONARY, canonical_service_name


class GroupKey(str, Enum):
    OPEN_JSON = "open_json"
    OPEN_NONJSON = "open_nonjson"
    CLOSED_JSON = "closed_json"
    CLOSED_NONJSON = "closed_nonjson"


def pct(numerator: int, denominator: int) -> float:
    """Exact percentage; 0.0 for an empty denominator."""
    if denominator == 0:
        return 0.0
    return 100.0 * numerator / denominator


def pct_display(numerator: int, denominator: int) -> int:
    """Percentage rounded half-up to an integer, as printed in reports."""
    if denominator == 0:
        return 0
    ratio = Decimal(100 * numerator) / Decimal(denominator)
    return int(ratio.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def group_key(target: ProbeTarget, result: ProbeResult) -> GroupKey:
    """Development model x payload format; declared_format wins when present."""
    if target.declared_format is not None:
        is_json = target.declared_format is DeclaredFormat.JSON
    else:
        is_json = result.body_format is BodyFormat.JSON
    if target.source_model is SourceModel.OPEN_SOURCE:
        return GroupKey.OPEN_JSON if is_json else GroupKey.OPEN_NONJSON
    return GroupKey.CLOSED_JSON if is_json else GroupKey.CLOSED_NONJSON


@dataclass(frozen=True)
class PrevalenceCell:
    urls_affected: int
    urls_total: int
    apps_affected: int
    apps_total: int

    @property
    def url_pct(self) -> float:
        return pct(self.urls_affected, self.urls_total)

    @property
    def app_pct(self) -> float:
        return pct(self.apps_affected, self.apps_total)

    @property
    def url_pct_display(self) -> int:
        return pct_display(self.urls_affected, self.urls_total)

    @property
    def app_pct_display(self) -> int:
        return pct_display(self.apps_affected, self.apps_total)


_PREVALENCE_COLUMNS = [
    "group",
    "smell",
    "urls_affected",
    "urls_total",
    "url_pct",
    "url_pct_display",
    "apps_affected",
    "apps_total",
    "app_pct",
    "app_pct_display",
]


@dataclass(frozen=True)
class PrevalenceTable:
    cells: dict[tuple[GroupKey, SmellKind], PrevalenceCell]

    columns = _PREVALENCE_COLUMNS

    def cell(self, group: GroupKey, kind: SmellKind) -> PrevalenceCell:
        return self.cells[(group, kind)]

    def to_rows(self) -> list[dict]:
        rows = []
        for group in GroupKey:
            for kind in SmellKind:
                cell = self.cells[(group, kind)]
                rows.append(
                    {
                        "group": group.value,
                        "smell": kind.value,
                        "urls_affected": cell.urls_affected,
                        "urls_total": cell.urls_total,
                        "url_pct": cell.url_pct,
                        "url_pct_display": cell.url_pct_display,
                        "apps_affected": cell.apps_affected,
                        "apps_total": cell.apps_total,
                        "app_pct": cell.app_pct,
                        "app_pct_display": cell.app_pct_display,
                    }
                )
        return rows


def prevalence(snapshot: Snapshot, corpus: list[ProbeTarget] | tuple[ProbeTarget, ...]) -> PrevalenceTable:
    """Per-group, per-smell affected counts at URL and app granularity.

    An app suffers from a smell when at least one of its URLs in the group
    has the finding.  Denominators are group sizes.
    """
    missing = [t.url for t in corpus if t.url not in snapshot.entries]
    if missing:
        raise ValueError(f"snapshot does not cover corpus: {len(missing)} url(s) missing")

    group_urls: dict[GroupKey, int] = {g: 0 for g in GroupKey}
    group_apps: dict[GroupKey, set[str]] = {g: set() for g in GroupKey}
    flagged_urls: Counter = Counter()
    flagged_apps: dict[tuple[GroupKey, SmellKind], set[str]] = {
        (g, k): set() for g in GroupKey for k in SmellKind
    }

    for target in corpus:
        entry = snapshot.entries[target.url]
        group = group_key(target, entry.result)
        group_urls[group] += 1
        group_apps[group].add(target.app_id)
        for kind in entry.report.kinds():
            flagged_urls[(group, kind)] += 1
            flagged_apps[(group, kind)].add(target.app_id)

    cells = {}
    for group in GroupKey:
        for kind in SmellKind:
            cells[(group, kind)] = PrevalenceCell(
                urls_affected=flagged_urls[(group, kind)],
                urls_total=group_urls[group],
                apps_affected=len(flagged_apps[(group, kind)]),
                apps_total=len(group_apps[group]),
            )
    return PrevalenceTable(cells=cells)


@dataclass(frozen=True)
class LeakBreakdown:
    """Counts keyed by (category, lowercased software name, locus)."""

    counts: dict[tuple[LeakCategory, str, str], int]

    columns = ["category", "software", "display", "locus", "count"]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def by_software(self, category: LeakCategory) -> dict[str, int]:
        tally: Counter = Counter()
        for (cat, name, _), count in self.counts.items():
            if cat is category:
                tally[name] += count
        return dict(tally)

    def by_locus_kind(self) -> dict[str, int]:
        """Header-field leaks vs body leaks."""
        tally = {"header": 0, "body": 0}
        for (_, _, locus), count in self.counts.items():
            tally["body" if locus == "body" else "header"] += count
        return tally

    def to_rows(self) -> list[dict]:
        rows = []
        for (category, software, locus), count in sorted(
            self.counts.items(), key=lambda item: (item[0][0].value, item[0][1], item[0][2])
        ):
            if category is LeakCategory.OS:
                display = OS_DICTIONARY.get(software, software)
            else:
                display = canonical_service_name(software)
            rows.append(
                {
                    "category": category.value,
                    "software": software,
                    "display": display,
                    "locus": locus,
                    "count": count,
                }
            )
        return rows


def leak_breakdown(snapshot: Snapshot) -> LeakBreakdown:
    """Tally every stored leak record by category, software, and locus."""
    counts: Counter = Counter()
    for entry in snapshot.entries.values():
        for leak in entry.report.leaks:
            counts[(leak.category, leak.software.lower(), leak.locus)] += 1
    return LeakBreakdown(counts=dict(counts))


@dataclass(frozen=True)
class HstsStats:
    """HSTS posture tallies over the https endpoints that answered.

    missing_include_subdomains and missing_preload count endpoints without
    the respective directive, including those with no HSTS header at all.
    """

    https_total: int
    protected: int
    absent: int
    short_max_age: int
    missing_include_subdomains: int
    missing_preload: int

    columns = ["metric", "count"]

    def to_rows(self) -> list[dict]:
        return [
            {"metric": "https_total", "count": self.https_total},
            {"metric": "protected", "count": self.protected},
            {"metric": "absent", "count": self.absent},
            {"metric": "short_max_age", "count": self.short_max_age},
            {"metric": "missing_include_subdomains", "count": self.missing_include_subdomains},
            {"metric": "missing_preload", "count": self.missing_preload},
        ]


def hsts_stats(snapshot: Snapshot) -> HstsStats:
    """Tally detect_missing_hsts outcomes stored in the snapshot."""
    https_total = 0
    protected = 0
    absent = 0
    short_max_age = 0
    missing_subdomains = 0
    missing_preload = 0
    for entry in snapshot.entries.values():
        result = entry.result
        if result.scheme_used is not Scheme.HTTPS or result.status is None:
            continue
        https_total += 1
        finding = next(
            (f for f in entry.report.findings if f.kind is SmellKind.MISSING_HSTS), None
        )
        if finding is None:
            protected += 1
            continue
        if "absent" in finding.subflags:
            absent += 1
            missing_subdomains += 1
            missing_preload += 1
            continue
        if "short_max_age" in finding.subflags:
            short_max_age += 1
        if "missing_include_subdomains" in finding.subflags:
            missing_subdomains += 1
        if "missing_preload" in finding.subflags:
            missing_preload += 1
    return HstsStats(
        https_total=https_total,
        protected=protected,
        absent=absent,
        short_max_age=short_max_age,
        missing_include_subdomains=missing_subdomains,
        missing_preload=missing_preload,
    )


@dataclass(frozen=True)
class CorrelationMatrix:
    """scenario x smell-count cells; total equals the classified URL count."""

    cells: dict[tuple[MaintenanceScenario, int], int]

    columns = ["scenario", "smell_count", "urls"]

    @property
    def total(self) -> int:
        return sum(self.cells.values())

    def to_rows(self) -> list[dict]:
        rows = []
        for (scenario, count), urls in sorted(
            self.cells.items(), key=lambda item: (item[0][0].value, item[0][1])
        ):
            rows.append({"scenario": scenario.value, "smell_count": count, "urls": urls})
        return rows


def correlate(
    smell_counts: dict[str, int], records: list[MaintenanceRecord]
) -> CorrelationMatrix:
    """Cell (scenario, k): URLs with k smells that landed in that scenario.

    Only classified records participate; every classified record's URL must
    appear in smell_counts.
    """
    cells: Counter = Counter()
    for record in records:
        if record.scenario is None:
            continue
        if record.url not in smell_counts:
            raise KeyError(f"no smell count for {record.url!r}")
        cells[(record.scenario, smell_counts[record.url])] += 1
    return CorrelationMatrix(cells=dict(cells))


def export(report, path: str | Path, format: str = "csv") -> None:
    """Write a report's rows with a stable column order.

    Re-exports of the same report are byte-identical.
    """
    rows = report.to_rows()
    columns = report.columns
    path = Path(path)
    if format == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    elif format == "json":
        payload = {"columns": columns, "rows": rows}
        path.write_text(
            json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n",
            encoding="utf-8",
        )
    else:
        raise ValueError(f"unknown export format: {format!r}")
