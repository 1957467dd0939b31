import random

import pytest
from hypothesis import given, strategies as st

from smellprobe.maintenance import (
    Classification,
    MaintenanceRecord,
    MaintenanceScenario,
    UnclassifiableReason,
    classify_change,
    diff_snapshots,
    server_banner,
)
from smellprobe.versions import parse_product_token

from helpers import build_entry, snapshot_pair


def sid(token):
    return parse_product_token(token) if token is not None else None


def outcome(before, after):
    return classify_change(sid(before), sid(after))


class TestClassifyChange:
    def test_downgrade(self):
        assert outcome("nginx/1.14.1", "nginx/1.12.1") == Classification(
            MaintenanceScenario.VERSION_DOWNGRADE, None
        )

    def test_identity_is_no_update(self):
        assert outcome("nginx/1.14.1", "nginx/1.14.1") == Classification(
            MaintenanceScenario.NO_UPDATE, None
        )

    def test_upgrade(self):
        assert outcome("nginx/1.12.1", "nginx/1.14.1") == Classification(
            MaintenanceScenario.VERSION_UPGRADE, None
        )

    def test_cloudflare_gateway(self):
        assert outcome("apache/2.4.41", "cloudflare") == Classification(
            MaintenanceScenario.CLOUDFLARE_ENABLED, None
        )

    def test_cloudflare_requires_after_side(self):
        # moving OFF cloudflare is an environment change, not cloudflare_enabled
        assert outcome("cloudflare", "apache/2.4.41") == Classification(
            MaintenanceScenario.ENVIRONMENT_CHANGED, None
        )

    def test_environment_changed(self):
        assert outcome("Apache/2.4.41", "Microsoft-IIS/10.0") == Classification(
            MaintenanceScenario.ENVIRONMENT_CHANGED, None
        )

    def test_leak_closed_when_version_disappears(self):
        assert outcome("Apache/2.4.41", "Apache") == Classification(
            MaintenanceScenario.LEAK_CLOSED, None
        )

    def test_bare_names_both_sides_is_no_update(self):
        assert outcome("cloudflare", "cloudflare") == Classification(
            MaintenanceScenario.NO_UPDATE, None
        )

    def test_spawned_and_shutdown_defaults(self):
        assert outcome(None, "nginx/1.14.1") == Classification(
            MaintenanceScenario.SERVER_SPAWNED, None
        )
        assert outcome("nginx/1.14.1", None) == Classification(
            MaintenanceScenario.SERVER_SHUTDOWN, None
        )

    def test_both_absent_yields_nothing(self):
        assert classify_change(None, None) is None

    def test_unorderable_version_text(self):
        assert outcome("nginx/1.14.1", "nginx/beta2") == Classification(
            None, UnclassifiableReason.VERSIONING_SCHEME_CHANGED
        )

    def test_version_appearing_is_unorderable(self):
        assert outcome("nginx", "nginx/1.14.1") == Classification(
            None, UnclassifiableReason.VERSIONING_SCHEME_CHANGED
        )

    def test_name_comparison_case_insensitive(self):
        assert outcome("Apache/2.4.41", "apache/2.4.41") == Classification(
            MaintenanceScenario.NO_UPDATE, None
        )

    def test_zero_padded_versions_equal(self):
        assert outcome("thing/1.0", "thing/1.0.0") == Classification(
            MaintenanceScenario.NO_UPDATE, None
        )


TOKENS = [
    None,
    "nginx",
    "nginx/1.12.1",
    "nginx/1.14.1",
    "nginx/beta2",
    "Apache",
    "Apache/2.4.41",
    "cloudflare",
    "Microsoft-IIS/10.0",
]


class TestClassifyProperties:
    def test_partition_over_randomized_pairs(self):
        rng = random.Random(2024)
        for _ in range(1000):
            before, after = rng.choice(TOKENS), rng.choice(TOKENS)
            result = classify_change(sid(before), sid(after))
            if before is None and after is None:
                assert result is None
            else:
                assert result is not None
                assert (result.scenario is None) != (result.reason is None)

    @given(
        st.sampled_from(TOKENS[1:]),
        st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=4),
        st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=4),
    )
    def test_antisymmetry_of_version_moves(self, name, seg_a, seg_b):
        name = name.split("/")[0]
        a = sid(f"{name}/{'.'.join(map(str, seg_a))}")
        b = sid(f"{name}/{'.'.join(map(str, seg_b))}")
        forward = classify_change(a, b)
        backward = classify_change(b, a)
        mapping = {
            MaintenanceScenario.VERSION_UPGRADE: MaintenanceScenario.VERSION_DOWNGRADE,
            MaintenanceScenario.VERSION_DOWNGRADE: MaintenanceScenario.VERSION_UPGRADE,
            MaintenanceScenario.NO_UPDATE: MaintenanceScenario.NO_UPDATE,
        }
        assert backward.scenario == mapping[forward.scenario]


class TestMaintenanceRecord:
    def test_exactly_one_outcome_enforced(self):
        with pytest.raises(ValueError):
            MaintenanceRecord("u", None, None, None, None)
        with pytest.raises(ValueError):
            MaintenanceRecord(
                "u",
                None,
                None,
                MaintenanceScenario.SERVER_SPAWNED,
                UnclassifiableReason.SPAWNED_UNKNOWN_CONFIG,
            )

    def test_version_moves_require_same_name(self):
        with pytest.raises(ValueError):
            MaintenanceRecord(
                "u",
                sid("nginx/1.0"),
                sid("apache/2.0"),
                MaintenanceScenario.VERSION_UPGRADE,
                None,
            )


class TestDiffSnapshots:
    def test_requires_chronological_order(self):
        s1, s2 = snapshot_pair({}, {})
        with pytest.raises(ValueError):
            diff_snapshots(s2, s1)

    def test_url_missing_from_first_snapshot_is_spawned(self):
        url = "http://u.example/"
        s1, s2 = snapshot_pair({}, {url: build_entry(url, server="nginx/1.14.1")})
        records = diff_snapshots(s1, s2)
        assert len(records) == 1
        assert records[0].scenario is MaintenanceScenario.SERVER_SPAWNED

    def test_bannerless_then_banner_is_spawned(self):
        url = "http://u.example/"
        s1, s2 = snapshot_pair(
            {url: build_entry(url)},
            {url: build_entry(url, server="nginx/1.14.1")},
        )
        assert diff_snapshots(s1, s2)[0].scenario is MaintenanceScenario.SERVER_SPAWNED

    def test_dead_then_banner_is_unknown_config(self):
        url = "http://u.example/"
        s1, s2 = snapshot_pair(
            {url: build_entry(url, status=None, error="connection refused")},
            {url: build_entry(url, server="nginx/1.14.1")},
        )
        record = diff_snapshots(s1, s2)[0]
        assert record.scenario is None
        assert record.unclassifiable_reason is UnclassifiableReason.SPAWNED_UNKNOWN_CONFIG

    def test_banner_lost_but_alive_is_leak_closed(self):
        url = "http://u.example/"
        s1, s2 = snapshot_pair(
            {url: build_entry(url, server="Apache/2.4.41")},
            {url: build_entry(url)},
        )
        assert diff_snapshots(s1, s2)[0].scenario is MaintenanceScenario.LEAK_CLOSED

    def test_banner_then_transport_failure_is_shutdown(self):
        url = "http://u.example/"
        s1, s2 = snapshot_pair(
            {url: build_entry(url, server="nginx/1.14.1")},
            {url: build_entry(url, status=None, error="connection refused")},
        )
        assert diff_snapshots(s1, s2)[0].scenario is MaintenanceScenario.SERVER_SHUTDOWN

    def test_banner_then_missing_record_is_no_comparison(self):
        url = "http://u.example/"
        s1, s2 = snapshot_pair({url: build_entry(url, server="Apache/2.4.41")}, {})
        record = diff_snapshots(s1, s2)[0]
        assert record.unclassifiable_reason is UnclassifiableReason.SHUTDOWN_NO_COMPARISON

    def test_bannerless_on_both_sides_skipped(self):
        url = "http://u.example/"
        s1, s2 = snapshot_pair(
            {url: build_entry(url)},
            {url: build_entry(url, status=None, error="timeout")},
        )
        assert diff_snapshots(s1, s2) == []

    def test_empty_snapshots_empty_diff(self):
        s1, s2 = snapshot_pair({}, {})
        assert diff_snapshots(s1, s2) == []

    def test_every_record_has_exactly_one_outcome(self):
        urls = {}
        urls1, urls2 = {}, {}
        cases = [
            ("nginx/1.14.1", "nginx/1.14.1"),
            ("nginx/1.14.1", "nginx/1.12.1"),
            ("nginx/1.12.1", "nginx/1.14.1"),
            ("Apache/2.4.41", "Apache"),
            ("Apache/2.4.41", "Microsoft-IIS/10.0"),
            ("Apache/2.4.41", "cloudflare"),
            (None, "nginx/1.14.1"),
            ("nginx/1.14.1", "nginx/beta2"),
        ]
        for i, (before, after) in enumerate(cases):
            url = f"http://u{i}.example/"
            urls1[url] = build_entry(url, server=before)
            urls2[url] = build_entry(url, server=after)
        s1, s2 = snapshot_pair(urls1, urls2)
        records = diff_snapshots(s1, s2)
        assert len(records) == len(cases)
        for record in records:
            assert (record.scenario is None) != (record.unclassifiable_reason is None)

    def test_first_product_token_is_comparison_subject(self):
        url = "http://u.example/"
        s1, s2 = snapshot_pair(
            {url: build_entry(url, server="Apache/2.4.41 (Ubuntu) OpenSSL/1.1.1")},
            {url: build_entry(url, server="Apache/2.4.46 (Ubuntu) OpenSSL/1.1.1k")},
        )
        record = diff_snapshots(s1, s2)[0]
        assert record.scenario is MaintenanceScenario.VERSION_UPGRADE
        assert record.before.name == "apache"
        assert "OpenSSL/1.1.1" in record.annotations

    def test_cloudflare_only_when_after_is_cloudflare(self):
        records_with_cf = []
        for before, after in [("a/1", "cloudflare"), ("cloudflare", "b/1"), ("a/1", "b/1")]:
            url = "http://u.example/"
            s1, s2 = snapshot_pair(
                {url: build_entry(url, server=before)},
                {url: build_entry(url, server=after)},
            )
            record = diff_snapshots(s1, s2)[0]
            if record.scenario is MaintenanceScenario.CLOUDFLARE_ENABLED:
                records_with_cf.append(record)
        assert len(records_with_cf) == 1
        assert records_with_cf[0].after.name == "cloudflare"


def test_server_banner_reads_direct_result():
    entry = build_entry("http://u.example/", server="nginx/1.14.1 (Ubuntu) mod_x/1.0")
    first, rest = server_banner(entry)
    assert first.name == "nginx"
    assert rest == ("mod_x/1.0",)
    assert server_banner(None) == (None, ())
