import itertools
import random

import pytest
from hypothesis import given, strategies as st

from smellprobe.versions import (
    OS_DICTIONARY,
    SoftwareId,
    classify_os,
    compare_versions,
    parse_banner,
    parse_product_token,
    parse_version,
)

from helpers import oracle_compare_versions

segments = st.lists(st.integers(min_value=0, max_value=999), min_size=1, max_size=5).map(tuple)


class TestParseBanner:
    def test_product_with_version_and_os(self):
        parsed = parse_banner("nginx/1.14.1 (Ubuntu)")
        assert len(parsed.software) == 1
        sid = parsed.software[0]
        assert sid.name == "nginx"
        assert sid.version == (1, 14, 1)
        assert parsed.os == "Ubuntu"

    def test_name_only_token(self):
        parsed = parse_banner("cloudflare")
        assert parsed.software[0].name == "cloudflare"
        assert parsed.software[0].version is None
        assert parsed.os is None

    def test_iis_token(self):
        sid = parse_banner("Microsoft-IIS/10.0").software[0]
        assert sid.name == "microsoft-iis"
        assert sid.version == (10, 0)
        assert sid.display_name == "Microsoft-IIS"

    def test_multiple_products_packed_into_one_banner(self):
        parsed = parse_banner("Apache/2.4.41 (Ubuntu) OpenSSL/1.1.1 mod_wsgi/4.6.8")
        names = [sid.name for sid in parsed.software]
        assert names == ["apache", "openssl", "mod_wsgi"]
        assert parsed.os == "Ubuntu"

    def test_unknown_annotation_kept(self):
        parsed = parse_banner("Apache/2.4.41 (Custom Build 7)")
        assert parsed.os is None
        assert parsed.annotations == ("Custom Build 7",)

    def test_numeric_suffix_dropped_for_ordering(self):
        sid = parse_product_token("PHP/5.5.23-1ubuntu3")
        assert sid.version == (5, 5, 23)
        assert sid.raw == "PHP/5.5.23-1ubuntu3"
        assert sid.version_text == "5.5.23-1ubuntu3"

    def test_fully_non_numeric_version(self):
        sid = parse_product_token("nginx/beta2")
        assert sid.version is None
        assert sid.version_text == "beta2"

    def test_unparseable_token_falls_back_to_raw_name(self):
        sid = parse_product_token("/oddball")
        assert sid.name == "/oddball"
        assert sid.version is None

    @given(st.lists(st.integers(min_value=0, max_value=99), min_size=1, max_size=4))
    def test_numeric_information_survives_round_trip(self, parts):
        text = ".".join(str(p) for p in parts)
        sid = parse_product_token(f"thing/{text}")
        assert sid.version is not None
        assert [int(p) for p in text.split(".")] == list(sid.version)
        assert sid.version_string == text

    def test_os_classification_stays_in_dictionary(self):
        for annotation in ["Ubuntu", "CentOS", "cPanel", "Red Hat Enterprise", "Amazon", "PlanetX"]:
            result = classify_os(annotation)
            assert result is None or result in OS_DICTIONARY.values()

    def test_display_casing_preserved_for_leaks(self):
        sid = parse_product_token("PHP/5.5.23")
        assert sid.display_name == "PHP"
        assert sid.name == "php"


class TestCompareVersions:
    def test_downgrade_pair_orders_as_less(self):
        assert compare_versions((1, 12, 1), (1, 14, 1)) == -1

    def test_zero_padding_makes_equal(self):
        assert compare_versions((1, 0), (1, 0, 0)) == 0

    def test_segment_magnitude_beats_depth(self):
        assert compare_versions((2, 0), (1, 99)) == 1

    def test_empty_segments_rejected(self):
        with pytest.raises(ValueError):
            compare_versions((), (1,))

    def test_exhaustive_at_reduced_bound(self):
        pool = [
            tuple(c)
            for length in (1, 2, 3)
            for c in itertools.product(range(4), repeat=length)
        ]
        for a, b in itertools.product(pool, repeat=2):
            assert compare_versions(a, b) == oracle_compare_versions(a, b)

    def test_sampled_at_full_bound(self):
        rng = random.Random(7)
        for _ in range(2000):
            a = tuple(rng.randrange(100) for _ in range(rng.randint(1, 4)))
            b = tuple(rng.randrange(100) for _ in range(rng.randint(1, 4)))
            assert compare_versions(a, b) == oracle_compare_versions(a, b)

    @given(segments)
    def test_reflexive(self, a):
        assert compare_versions(a, a) == 0

    @given(segments, segments)
    def test_antisymmetric(self, a, b):
        assert compare_versions(a, b) == -compare_versions(b, a)

    @given(segments, segments, segments)
    def test_transitive(self, a, b, c):
        if compare_versions(a, b) <= 0 and compare_versions(b, c) <= 0:
            assert compare_versions(a, c) <= 0


def test_parse_version_edge_cases():
    assert parse_version("1.3.6b") == (1, 3, 6)
    assert parse_version("beta") is None
    assert parse_version("10") == (10,)


def test_software_id_rejects_empty_name():
    with pytest.raises(ValueError):
        SoftwareId(name="", version=None, raw="")
