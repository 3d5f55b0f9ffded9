"""Android binary-XML (AXML) decoding and manifest feature extraction.

Binary manifests are chunk streams: a document header (type 0x0003), a
string pool (0x0001), an optional resource map (0x0180), and namespace /
element chunks (0x0100-0x0104). Plain-text XML is accepted as an
alternate input and decoded into the same start/end event model, which is
what the feature extractor consumes.
"""

from __future__ import annotations

import logging
import struct
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import escape, quoteattr

log = logging.getLogger(__name__)

_CHUNK_STRING_POOL = 0x0001
_CHUNK_XML_DOCUMENT = 0x0003
_CHUNK_RESOURCE_MAP = 0x0180
_CHUNK_START_NAMESPACE = 0x0100
_CHUNK_END_NAMESPACE = 0x0101
_CHUNK_START_ELEMENT = 0x0102
_CHUNK_END_ELEMENT = 0x0103
_CHUNK_TEXT = 0x0104

_UTF8_FLAG = 1 << 8
_TYPE_STRING = 0x03
_NO_ENTRY = 0xFFFFFFFF


class AxmlError(Exception):
    """Base class for manifest decoding failures."""


class UnsupportedFormatError(AxmlError):
    """Input is neither binary AXML nor text XML."""


class TruncatedError(AxmlError):
    """A chunk or string runs past the end of the buffer."""


class BadStringIndexError(AxmlError):
    """A string reference points outside the string pool."""


@dataclass(frozen=True)
class XmlEvent:
    """One element event; attributes are (local name, string value) pairs."""

    kind: str                                        # "start" | "end"
    name: str
    attributes: tuple[tuple[str, str], ...] = ()

    def attr(self, local_name: str) -> str | None:
        for name, value in self.attributes:
            if name == local_name:
                return value
        return None


@dataclass(frozen=True)
class AxmlDocument:
    strings: tuple[str, ...]
    events: tuple[XmlEvent, ...]


@dataclass(frozen=True)
class ManifestFeatures:
    """Unique permission and intent-value names, in first-occurrence order."""

    permissions: tuple[str, ...]
    intent_values: tuple[str, ...]


def parse_axml(data: bytes) -> AxmlDocument:
    """Decode binary AXML or plain-text XML into an element event stream."""
    if not data:
        raise UnsupportedFormatError("empty input")
    if len(data) >= 4 and struct.unpack_from("<H", data)[0] == _CHUNK_XML_DOCUMENT:
        return _parse_binary(data)
    text = data.decode("utf-8", "replace").lstrip("﻿ \t\r\n")
    if text.startswith("<"):
        return _parse_text(text)
    raise UnsupportedFormatError("input is neither binary AXML nor text XML")


def _parse_binary(data: bytes) -> AxmlDocument:
    _, header_size, declared = struct.unpack_from("<HHI", data, 0)
    end = min(declared, len(data))
    if declared > len(data):
        raise TruncatedError(f"declared size {declared} exceeds buffer {len(data)}")

    strings: tuple[str, ...] = ()
    events: list[XmlEvent] = []
    open_names: list[str] = []
    off = header_size if header_size >= 8 else 8

    while off + 8 <= end:
        chunk_type, chunk_header, chunk_size = struct.unpack_from("<HHI", data, off)
        if chunk_size < 8 or off + chunk_size > end:
            raise TruncatedError(f"chunk {chunk_type:#06x} at {off:#x} overruns buffer")

        if chunk_type == _CHUNK_STRING_POOL:
            strings = _parse_string_pool(data, off, chunk_size)
        elif chunk_type == _CHUNK_START_ELEMENT:
            events.append(_parse_start_element(data, off, chunk_header, strings))
            open_names.append(events[-1].name)
        elif chunk_type == _CHUNK_END_ELEMENT:
            name_idx = struct.unpack_from("<I", data, off + 20)[0]
            name = _pool_string(strings, name_idx, "end-element name")
            if open_names and open_names[-1] != name:
                log.warning("mismatched end element %r (open: %r)", name, open_names[-1])
            if open_names:
                open_names.pop()
            events.append(XmlEvent("end", name))
        elif chunk_type in (_CHUNK_RESOURCE_MAP, _CHUNK_START_NAMESPACE,
                            _CHUNK_END_NAMESPACE, _CHUNK_TEXT):
            pass
        else:
            log.warning("skipping unknown chunk type %#06x at %#x", chunk_type, off)
        off += chunk_size

    return AxmlDocument(strings=strings, events=tuple(events))


def _parse_string_pool(data: bytes, off: int, chunk_size: int) -> tuple[str, ...]:
    header_size = struct.unpack_from("<H", data, off + 2)[0]
    (count, _style_count, flags,
     strings_start, _styles_start) = struct.unpack_from("<5I", data, off + 8)
    offsets_base = off + max(header_size, 28)    # offsets follow the pool header
    if offsets_base + 4 * count > off + chunk_size:
        raise TruncatedError("string pool offset table overruns chunk")
    data_base = off + strings_start
    utf8 = bool(flags & _UTF8_FLAG)

    out = []
    for i in range(count):
        rel = struct.unpack_from("<I", data, offsets_base + 4 * i)[0]
        at = data_base + rel
        if at >= off + chunk_size:
            raise TruncatedError(f"string {i} offset {rel:#x} outside pool")
        out.append(_decode_pool_string(data, at, utf8))
    return tuple(out)


def _decode_pool_length(data: bytes, at: int, wide: bool) -> tuple[int, int]:
    # Lengths use a high-bit extension: if the top bit of the first unit is
    # set, the value continues into a second unit.
    if wide:
        first = struct.unpack_from("<H", data, at)[0]
        if first & 0x8000:
            second = struct.unpack_from("<H", data, at + 2)[0]
            return ((first & 0x7FFF) << 16) | second, at + 4
        return first, at + 2
    first = data[at]
    if first & 0x80:
        return ((first & 0x7F) << 8) | data[at + 1], at + 2
    return first, at + 1


def _decode_pool_string(data: bytes, at: int, utf8: bool) -> str:
    try:
        if utf8:
            _, at = _decode_pool_length(data, at, wide=False)   # UTF-16 length
            nbytes, at = _decode_pool_length(data, at, wide=False)
            return data[at:at + nbytes].decode("utf-8", "replace")
        nchars, at = _decode_pool_length(data, at, wide=True)
        return data[at:at + 2 * nchars].decode("utf-16-le", "replace")
    except (IndexError, struct.error) as exc:
        raise TruncatedError(f"string data at {at:#x} truncated") from exc


def _pool_string(strings: tuple[str, ...], idx: int, what: str) -> str:
    if idx >= len(strings):
        raise BadStringIndexError(f"{what}: index {idx} outside pool of {len(strings)}")
    return strings[idx]


def _parse_start_element(
    data: bytes, off: int, header_size: int, strings: tuple[str, ...],
) -> XmlEvent:
    body = off + header_size
    (_ns_idx, name_idx, attr_start, attr_size,
     attr_count, _id_idx, _class_idx, _style_idx) = struct.unpack_from("<IIHHHHHH", data, body)
    name = _pool_string(strings, name_idx, "element name")

    attrs = []
    at = body + attr_start
    for _ in range(attr_count):
        (_attr_ns, attr_name_idx, raw_idx,
         _tv_size, _res0, data_type, value_data) = struct.unpack_from("<IIIHBBI", data, at)
        attr_name = _pool_string(strings, attr_name_idx, "attribute name")
        if data_type == _TYPE_STRING:
            value = _pool_string(strings, value_data, "attribute value")
        elif raw_idx != _NO_ENTRY:
            value = _pool_string(strings, raw_idx, "attribute raw value")
        else:
            value = str(value_data)
        attrs.append((attr_name, value))
        at += attr_size

    return XmlEvent("start", name, tuple(attrs))


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_text(text: str) -> AxmlDocument:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise UnsupportedFormatError(f"invalid XML text: {exc}") from exc

    events: list[XmlEvent] = []

    def walk(elem: ET.Element) -> None:
        attrs = tuple((_local(k), v) for k, v in elem.attrib.items())
        events.append(XmlEvent("start", _local(elem.tag), attrs))
        for child in elem:
            walk(child)
        events.append(XmlEvent("end", _local(elem.tag)))

    walk(root)
    return AxmlDocument(strings=(), events=tuple(events))


def to_xml(doc: AxmlDocument) -> str:
    """Render the event stream back to plain XML (debug / round-trip aid)."""
    parts: list[str] = []
    depth = 0
    events = doc.events
    for i, ev in enumerate(events):
        if ev.kind == "start":
            attrs = "".join(f" {n}={quoteattr(v)}" for n, v in ev.attributes)
            pad = "  " * depth
            if i + 1 < len(events) and events[i + 1].kind == "end" \
                    and events[i + 1].name == ev.name:
                parts.append(f"{pad}<{escape(ev.name)}{attrs}/>\n")
            else:
                parts.append(f"{pad}<{escape(ev.name)}{attrs}>\n")
                depth += 1
        else:
            if i > 0 and events[i - 1].kind == "start" \
                    and events[i - 1].name == ev.name:
                continue                      # collapsed to a self-closing tag
            depth -= 1
            parts.append(f"{'  ' * depth}</{escape(ev.name)}>\n")
    return "".join(parts)


def extract_manifest_features(doc: AxmlDocument) -> ManifestFeatures:
    """Collect permission names and intent-filter action/category names.

    Permissions come from the android:name attribute of uses-permission
    elements; intent values from action and category elements nested (at
    any depth) inside an intent-filter. Both lists are de-duplicated,
    keeping first-occurrence order.
    """
    permissions: list[str] = []
    intent_values: list[str] = []
    seen_perm: set[str] = set()
    seen_intent: set[str] = set()
    filter_depth = 0

    for ev in doc.events:
        if ev.kind == "start":
            if ev.name == "uses-permission":
                value = ev.attr("name")
                if value is not None and value not in seen_perm:
                    seen_perm.add(value)
                    permissions.append(value)
            elif ev.name in ("action", "category") and filter_depth > 0:
                value = ev.attr("name")
                if value is not None and value not in seen_intent:
                    seen_intent.add(value)
                    intent_values.append(value)
            if ev.name == "intent-filter":
                filter_depth += 1
        elif ev.kind == "end" and ev.name == "intent-filter" and filter_depth > 0:
            filter_depth -= 1

    return ManifestFeatures(tuple(permissions), tuple(intent_values))


def dump_features(features: ManifestFeatures) -> str:
    """Debug dump: one feature per line, "<PERM|INTENT>\\t<value>"."""
    lines = [f"PERM\t{p}\n" for p in features.permissions]
    lines += [f"INTENT\t{v}\n" for v in features.intent_values]
    return "".join(lines)
