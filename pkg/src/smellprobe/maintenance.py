"""Classify how a server's software banner changed between two snapshots.

The comparison subject is the first product token of the ``Server`` header
of the direct probe result; additional tokens ride along as annotations.
URLs with no Server banner on either side are not comparable and yield no
record.

Name/version decision table (same comparison subject on both sides):

    same name, neither side has version text        -> no_update
    same name, versions parse, after == before      -> no_update
    same name, versions parse, after <  before      -> version_downgrade
    same name, versions parse, after >  before      -> version_upgrade
    same name, before versioned, after has none     -> leak_closed
    same name, any version text unorderable         -> versioning_scheme_changed
    different name, after is cloudflare             -> cloudflare_enabled
    different name otherwise                        -> environment_changed

When a banner exists on only one side, endpoint liveness disambiguates:

    banner gone, endpoint still answers             -> leak_closed
    banner gone, probe failed at transport level    -> server_shutdown
    banner gone, url missing from second snapshot   -> shutdown_no_comparison
    banner new, url missing from first snapshot     -> server_spawned
    banner new, endpoint answered banner-less first -> server_spawned
    banner new, first probe failed at transport     -> spawned_unknown_config
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .snapshot import Snapshot, SnapshotEntry
from .versions import SoftwareId, compare_versions, parse_banner


class MaintenanceScenario(str, Enum):
    NO_UPDATE = "no_update"
    VERSION_DOWNGRADE = "version_downgrade"
    VERSION_UPGRADE = "version_upgrade"
    LEAK_CLOSED = "leak_closed"
    ENVIRONMENT_CHANGED = "environment_changed"
    CLOUDFLARE_ENABLED = "cloudflare_enabled"
    SERVER_SPAWNED = "server_spawned"
    SERVER_SHUTDOWN = "server_shutdown"


class UnclassifiableReason(str, Enum):
    SPAWNED_UNKNOWN_CONFIG = "spawned_unknown_config"
    SHUTDOWN_NO_COMPARISON = "shutdown_no_comparison"
    VERSIONING_SCHEME_CHANGED = "versioning_scheme_changed"


@dataclass(frozen=True)
class MaintenanceRecord:
    url: str
    before: SoftwareId | None
    after: SoftwareId | None
    scenario: MaintenanceScenario | None
    unclassifiable_reason: UnclassifiableReason | None = None
    annotations: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if (self.scenario is None) == (self.unclassifiable_reason is None):
            raise ValueError("exactly one of scenario and unclassifiable_reason must be set")
        if self.scenario in (
            MaintenanceScenario.NO_UPDATE,
            MaintenanceScenario.VERSION_DOWNGRADE,
            MaintenanceScenario.VERSION_UPGRADE,
        ):
            if self.before is None or self.after is None or self.before.name != self.after.name:
                raise ValueError(f"{self.scenario.value} requires an unchanged software name")


@dataclass(frozen=True)
class Classification:
    scenario: MaintenanceScenario | None
    reason: UnclassifiableReason | None


def classify_change(
    before: SoftwareId | None, after: SoftwareId | None
) -> Classification | None:
    """Apply the name/version decision table. None when both sides are absent.

    This is the pure banner-level view; diff_snapshots() refines the
    one-sided cases with endpoint liveness.
    """
    if before is None and after is None:
        return None
    if before is None:
        return Classification(MaintenanceScenario.SERVER_SPAWNED, None)
    if after is None:
        return Classification(MaintenanceScenario.SERVER_SHUTDOWN, None)

    if before.name != after.name:
        if after.name == "cloudflare":
            return Classification(MaintenanceScenario.CLOUDFLARE_ENABLED, None)
        return Classification(MaintenanceScenario.ENVIRONMENT_CHANGED, None)

    before_text = before.version_text
    after_text = after.version_text
    if before_text is None and after_text is None:
        return Classification(MaintenanceScenario.NO_UPDATE, None)
    if before_text is not None and after_text is None:
        return Classification(MaintenanceScenario.LEAK_CLOSED, None)
    if before.version is None or after.version is None:
        # Version text exists on a side we cannot order numerically.
        return Classification(None, UnclassifiableReason.VERSIONING_SCHEME_CHANGED)
    ordering = compare_versions(after.version, before.version)
    if ordering < 0:
        return Classification(MaintenanceScenario.VERSION_DOWNGRADE, None)
    if ordering > 0:
        return Classification(MaintenanceScenario.VERSION_UPGRADE, None)
    return Classification(MaintenanceScenario.NO_UPDATE, None)


def server_banner(entry: SnapshotEntry | None) -> tuple[SoftwareId | None, tuple[str, ...]]:
    """First Server-header product token plus the remaining tokens' raw text."""
    if entry is None:
        return None, ()
    value = entry.result.first_header("server")
    if value is None or not value.strip():
        return None, ()
    parsed = parse_banner(value)
    if not parsed.software:
        return None, ()
    rest = tuple(sid.raw for sid in parsed.software[1:])
    return parsed.software[0], rest


def _alive(entry: SnapshotEntry | None) -> bool:
    return entry is not None and entry.result.status is not None


def _classify_url(
    url: str,
    first: SnapshotEntry | None,
    second: SnapshotEntry | None,
) -> MaintenanceRecord | None:
    before, before_rest = server_banner(first)
    after, after_rest = server_banner(second)
    if before is None and after is None:
        return None
    annotations = before_rest + after_rest

    if before is None:
        if first is not None and not _alive(first):
            reason = UnclassifiableReason.SPAWNED_UNKNOWN_CONFIG
            return MaintenanceRecord(url, before, after, None, reason, annotations)
        return MaintenanceRecord(
            url, before, after, MaintenanceScenario.SERVER_SPAWNED, None, annotations
        )

    if after is None:
        if second is None:
            reason = UnclassifiableReason.SHUTDOWN_NO_COMPARISON
            return MaintenanceRecord(url, before, after, None, reason, annotations)
        if _alive(second):
            scenario = MaintenanceScenario.LEAK_CLOSED
        else:
            scenario = MaintenanceScenario.SERVER_SHUTDOWN
        return MaintenanceRecord(url, before, after, scenario, None, annotations)

    outcome = classify_change(before, after)
    assert outcome is not None
    return MaintenanceRecord(
        url, before, after, outcome.scenario, outcome.reason, annotations
    )


def diff_snapshots(first: Snapshot, second: Snapshot) -> list[MaintenanceRecord]:
    """One record per comparable URL across the two snapshots.

    Requires first.taken_at < second.taken_at.  Output is sorted by URL.
    """
    if not first.taken_at < second.taken_at:
        raise ValueError("first snapshot must predate the second")
    urls = sorted(set(first.entries) | set(second.entries))
    records = []
    for url in urls:
        record = _classify_url(url, first.entries.get(url), second.entries.get(url))
        if record is not None:
            records.append(record)
    return records
