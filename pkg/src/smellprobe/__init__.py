"""smellprobe: scan app-server URLs for security smells and diff maintenance.

Probes HTTP(S) endpoints, detects six response-level security smells,
persists scan snapshots, and classifies how server software changed
between two snapshots taken months apart.
"""

from .corpus import (
    DeclaredFormat,
    LoadResult,
    ProbeTarget,
    RejectedRow,
    SourceModel,
    load_targets,
    normalize_url,
    write_rejects,
)
from .maintenance import (
    Classification,
    MaintenanceRecord,
    MaintenanceScenario,
    UnclassifiableReason,
    classify_change,
    diff_snapshots,
    server_banner,
)
from .probe import (
    BodyFormat,
    ProbeConfig,
    ProbeResult,
    RedirectChain,
    Scheme,
    follow_chain,
    probe_all,
    probe_and_follow,
    probe_once,
)
from .reports import (
    CorrelationMatrix,
    GroupKey,
    HstsStats,
    LeakBreakdown,
    PrevalenceTable,
    correlate,
    export,
    group_key,
    hsts_stats,
    leak_breakdown,
    pct_display,
    prevalence,
)
from .smells import (
    LeakCategory,
    LeakRecord,
    Locus,
    SmellFinding,
    SmellKind,
    SmellReport,
    detect_all,
    detect_insecure_transport,
    detect_lack_of_access_control,
    detect_missing_hsts,
    detect_missing_https_redirect,
    detect_source_code_disclosure,
    detect_version_disclosure,
)
from .snapshot import Snapshot, SnapshotEntry, SnapshotIntegrityError, load, save
from .versions import BannerParse, SoftwareId, compare_versions, parse_banner

__version__ = "0.1.0"

__all__ = [
    "BannerParse",
    "BodyFormat",
    "Classification",
    "CorrelationMatrix",
    "DeclaredFormat",
    "GroupKey",
    "HstsStats",
    "LeakBreakdown",
    "LeakCategory",
    "LeakRecord",
    "LoadResult",
    "Locus",
    "MaintenanceRecord",
    "MaintenanceScenario",
    "PrevalenceTable",
    "ProbeConfig",
    "ProbeResult",
    "ProbeTarget",
    "RedirectChain",
    "RejectedRow",
    "Scheme",
    "SmellFinding",
    "SmellKind",
    "SmellReport",
    "Snapshot",
    "SnapshotEntry",
    "SnapshotIntegrityError",
    "SoftwareId",
    "SourceModel",
    "UnclassifiableReason",
    "classify_change",
    "compare_versions",
    "correlate",
    "detect_all",
    "detect_insecure_transport",
    "detect_lack_of_access_control",
    "detect_missing_hsts",
    "detect_missing_https_redirect",
    "detect_source_code_disclosure",
    "detect_version_disclosure",
    "diff_snapshots",
    "export",
    "follow_chain",
    "group_key",
    "hsts_stats",
    "leak_breakdown",
    "load",
    "load_targets",
    "normalize_url",
    "parse_banner",
    "pct_display",
    "prevalence",
    "probe_all",
    "probe_and_follow",
    "probe_once",
    "save",
    "server_banner",
    "write_rejects",
]
