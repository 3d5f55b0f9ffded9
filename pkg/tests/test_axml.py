import pytest

import axmlfixture as ax
from droidseq.axml import (BadStringIndexError, ManifestFeatures,
                           TruncatedError, UnsupportedFormatError,
                           dump_features, extract_manifest_features,
                           parse_axml, to_xml)


class TestParseBinary:
    def test_uses_permission_fixture(self):
        data = ax.build_axml(ax.element("manifest", {}, [
            ax.element("uses-permission",
                       {"name": "android.permission.SEND_SMS"}),
        ]))
        doc = parse_axml(data)
        starts = [e for e in doc.events if e.kind == "start"]
        assert [e.name for e in starts] == ["manifest", "uses-permission"]
        assert starts[1].attr("name") == "android.permission.SEND_SMS"

    @pytest.mark.parametrize("utf8", [False, True])
    def test_both_pool_encodings(self, utf8):
        data = ax.build_axml(
            ax.element("manifest", {"package": "com.ex.唯一"}), utf8=utf8)
        doc = parse_axml(data)
        assert doc.events[0].attr("package") == "com.ex.唯一"

    def test_resource_map_skipped(self):
        spec = ax.element("manifest", {}, [ax.element("application")])
        with_map = parse_axml(ax.build_axml(spec, resource_map=True))
        without = parse_axml(ax.build_axml(spec, resource_map=False))
        assert with_map.events == without.events

    def test_nesting_of_events(self):
        data = ax.build_axml(ax.element("manifest", {}, [
            ax.element("application", {}, [ax.element("activity")]),
        ]))
        doc = parse_axml(data)
        assert [(e.kind, e.name) for e in doc.events] == [
            ("start", "manifest"), ("start", "application"),
            ("start", "activity"), ("end", "activity"),
            ("end", "application"), ("end", "manifest"),
        ]

    def test_unsupported_format(self):
        with pytest.raises(UnsupportedFormatError):
            parse_axml(b"\x00\x00\x00\x00")

    def test_empty_input(self):
        with pytest.raises(UnsupportedFormatError):
            parse_axml(b"")

    def test_truncated_chunk(self):
        data = ax.build_axml(ax.element("manifest"))
        with pytest.raises(TruncatedError):
            parse_axml(data[:len(data) - 6])

    def test_bad_string_index(self):
        import struct
        data = bytearray(ax.build_axml(ax.element("manifest")))
        # find the start-element chunk and point its name outside the pool
        off = 8
        while True:
            chunk_type, _, size = struct.unpack_from("<HHI", data, off)
            if chunk_type == 0x0102:
                struct.pack_into("<I", data, off + 20, 0xFFF0)
                break
            off += size
        with pytest.raises(BadStringIndexError):
            parse_axml(bytes(data))


class TestParseText:
    def test_degenerate_document(self):
        doc = parse_axml(b"<manifest/>")
        assert [(e.kind, e.name) for e in doc.events] == [
            ("start", "manifest"), ("end", "manifest")]

    def test_namespaced_attributes_match_by_local_name(self):
        text = (b'<manifest xmlns:android='
                b'"http://schemas.android.com/apk/res/android">'
                b'<uses-permission android:name="android.permission.INTERNET"/>'
                b'</manifest>')
        doc = parse_axml(text)
        perm = [e for e in doc.events if e.name == "uses-permission"][0]
        assert perm.attr("name") == "android.permission.INTERNET"

    def test_xml_declaration_and_leading_whitespace(self):
        doc = parse_axml(b'\n  <?xml version="1.0" encoding="utf-8"?>\n<manifest/>')
        assert doc.events[0].name == "manifest"

    def test_invalid_text(self):
        with pytest.raises(UnsupportedFormatError):
            parse_axml(b"<manifest")


class TestExtract:
    def test_permissions_and_boot_completed_filter(self):
        spec = ax.manifest_spec(
            permissions=("android.permission.SEND_SMS",
                         "android.permission.INTERNET"),
            filters=[[("action", "android.intent.action.BOOT_COMPLETED")]],
        )
        features = extract_manifest_features(parse_axml(ax.build_axml(spec)))
        assert features.permissions == ("android.permission.SEND_SMS",
                                        "android.permission.INTERNET")
        assert features.intent_values == ("android.intent.action.BOOT_COMPLETED",)

    def test_action_outside_filter_ignored(self):
        spec = ax.manifest_spec(loose_actions=("android.intent.action.VIEW",))
        features = extract_manifest_features(parse_axml(ax.build_axml(spec)))
        assert features.intent_values == ()

    def test_duplicates_removed(self):
        spec = ax.manifest_spec(
            permissions=("android.permission.SEND_SMS",
                         "android.permission.SEND_SMS"))
        features = extract_manifest_features(parse_axml(ax.build_axml(spec)))
        assert features.permissions == ("android.permission.SEND_SMS",)

    def test_categories_count_as_intent_values(self):
        spec = ax.manifest_spec(filters=[[
            ("action", "android.intent.action.MAIN"),
            ("category", "android.intent.category.LAUNCHER"),
        ]])
        features = extract_manifest_features(parse_axml(ax.build_axml(spec)))
        assert features.intent_values == ("android.intent.action.MAIN",
                                          "android.intent.category.LAUNCHER")

    def test_nested_descendants_of_filter(self):
        # action one level deeper than the filter still counts
        spec = ax.element("manifest", {}, [
            ax.element("intent-filter", {}, [
                ax.element("group", {}, [
                    ax.element("action", {"name": "android.intent.action.SEND"}),
                ]),
            ]),
        ])
        features = extract_manifest_features(parse_axml(ax.build_axml(spec)))
        assert features.intent_values == ("android.intent.action.SEND",)

    def test_missing_elements_give_empty_lists(self):
        features = extract_manifest_features(parse_axml(b"<manifest/>"))
        assert features == ManifestFeatures((), ())


class TestRoundTrip:
    def _spec(self):
        return ax.manifest_spec(
            permissions=("android.permission.SEND_SMS",
                         "android.permission.READ_CONTACTS"),
            filters=[
                [("action", "android.intent.action.BOOT_COMPLETED"),
                 ("category", "android.intent.category.DEFAULT")],
                [("action", "android.intent.action.MAIN")],
            ],
            loose_actions=("android.intent.action.VIEW",),
        )

    def test_binary_equals_text_rendering(self):
        binary = ax.build_axml(self._spec())
        doc = parse_axml(binary)
        rendered = to_xml(doc).encode("utf-8")
        assert extract_manifest_features(parse_axml(rendered)) \
            == extract_manifest_features(doc)

    def test_same_bytes_same_features(self):
        binary = ax.build_axml(self._spec())
        first = extract_manifest_features(parse_axml(binary))
        second = extract_manifest_features(parse_axml(binary))
        assert first == second


def test_dump_format():
    features = ManifestFeatures(
        ("android.permission.SEND_SMS",),
        ("android.intent.action.CALL",))
    assert dump_features(features) == (
        "PERM\tandroid.permission.SEND_SMS\n"
        "INTENT\tandroid.intent.action.CALL\n")
