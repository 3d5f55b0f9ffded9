"""DEX bytecode container parsing and code-token extraction.

Reference: the published Dalvik executable format
(https://source.android.com/docs/core/runtime/dex-format). All multi-byte
fields are little-endian. The parser decodes the index tables needed to
resolve method calls and string constants; the extractor walks every code
item and emits the API-call and string-constant tokens in instruction
order.
"""

from __future__ import annotations

import enum
import logging
import struct
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

_MAGIC_PREFIX = b"dex\n"
_SUPPORTED_VERSIONS = frozenset({"035", "036", "037", "038", "039"})
_HEADER_SIZE = 0x70
_ENDIAN_CONSTANT = 0x12345678
NO_INDEX = 0xFFFFFFFF

# Interesting opcodes: method invocations and string-constant loads.
_INVOKE_OPS = frozenset(range(0x6E, 0x73)) | frozenset(range(0x74, 0x79))
_OP_CONST_STRING = 0x1A
_OP_CONST_STRING_JUMBO = 0x1B

# Payload pseudo-instructions share opcode byte 0x00 with nop; the high
# byte of the first code unit selects them.
_PAYLOAD_PACKED_SWITCH = 0x01
_PAYLOAD_SPARSE_SWITCH = 0x02
_PAYLOAD_FILL_ARRAY = 0x03


class DexError(Exception):
    """Base class for DEX parsing failures."""


class BadMagicError(DexError):
    """Input is not a supported DEX file."""


class TruncatedError(DexError):
    """A section offset or size points beyond the end of the file."""


class IndexOutOfBoundsError(DexError):
    """An index table entry references a slot outside its target table."""


def _build_width_table() -> list[int]:
    """Instruction widths in 16-bit code units, indexed by opcode byte.

    Zero marks opcodes this decoder does not know (unused slots and the
    post-037 method-handle extensions); hitting one aborts decoding of the
    enclosing method only.
    """
    w = [0] * 256
    ranges = (
        (0x00, 0x01, 1),
        (0x02, 0x02, 2), (0x03, 0x03, 3),
        (0x04, 0x04, 1), (0x05, 0x05, 2), (0x06, 0x06, 3),
        (0x07, 0x07, 1), (0x08, 0x08, 2), (0x09, 0x09, 3),
        (0x0A, 0x12, 1),                       # move-result*..const/4
        (0x13, 0x13, 2), (0x14, 0x14, 3), (0x15, 0x16, 2),
        (0x17, 0x17, 3), (0x18, 0x18, 5), (0x19, 0x19, 2),
        (0x1A, 0x1A, 2), (0x1B, 0x1B, 3), (0x1C, 0x1C, 2),
        (0x1D, 0x1E, 1),                       # monitor-enter/exit
        (0x1F, 0x20, 2), (0x21, 0x21, 1), (0x22, 0x23, 2),
        (0x24, 0x26, 3),                       # filled-new-array*, fill-array-data
        (0x27, 0x28, 1), (0x29, 0x29, 2), (0x2A, 0x2A, 3),
        (0x2B, 0x2C, 3),                       # packed-switch, sparse-switch
        (0x2D, 0x3D, 2),                       # cmp*, if-test*
        (0x44, 0x6D, 2),                       # array/instance/static field ops
        (0x6E, 0x72, 3),                       # invoke-kind
        (0x74, 0x78, 3),                       # invoke-kind/range
        (0x7B, 0x8F, 1),                       # unary ops
        (0x90, 0xAF, 2),                       # binary ops
        (0xB0, 0xCF, 1),                       # binary ops /2addr
        (0xD0, 0xE2, 2),                       # binary ops with literal
    )
    for lo, hi, units in ranges:
        for op in range(lo, hi + 1):
            w[op] = units
    return w


_WIDTHS = _build_width_table()


class TokenKind(enum.Enum):
    API = "API"
    STRING = "STRING"


@dataclass(frozen=True)
class RawToken:
    """One extracted feature token, in code order."""

    kind: TokenKind
    text: str
    position: int


@dataclass(frozen=True)
class MethodRef:
    class_idx: int
    proto_idx: int
    name_idx: int


@dataclass(frozen=True)
class EncodedMethodRef:
    method_idx: int
    access_flags: int
    code_off: int


@dataclass(frozen=True)
class ClassDef:
    class_idx: int
    direct_methods: tuple[EncodedMethodRef, ...]
    virtual_methods: tuple[EncodedMethodRef, ...]


@dataclass(frozen=True)
class DexHeader:
    version: str
    endian_tag: int
    file_size: int
    # (count, byte offset) per index section
    string_ids: tuple[int, int]
    type_ids: tuple[int, int]
    proto_ids: tuple[int, int]
    field_ids: tuple[int, int]
    method_ids: tuple[int, int]
    class_defs: tuple[int, int]


@dataclass(frozen=True)
class DexFile:
    """Decoded DEX index tables plus the raw buffer for code items."""

    header: DexHeader
    data: bytes = field(repr=False)
    strings: tuple[str, ...]
    types: tuple[str, ...]
    protos: tuple[tuple[int, int, int], ...]   # (shorty_idx, return_type_idx, parameters_off)
    methods: tuple[MethodRef, ...]
    class_defs: tuple[ClassDef, ...]

    @property
    def version(self) -> str:
        return self.header.version

    def api_token(self, method_idx: int) -> str:
        """Render a method reference as "L<class>;-><name>" (no signature)."""
        m = self.methods[method_idx]
        return f"{self.types[m.class_idx]}->{self.strings[m.name_idx]}"


def _read_uleb128(data: bytes, off: int) -> tuple[int, int]:
    value = 0
    shift = 0
    while True:
        if off >= len(data):
            raise TruncatedError("uleb128 runs past end of file")
        b = data[off]
        off += 1
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value, off
        shift += 7
        if shift > 35:
            raise TruncatedError("uleb128 longer than 5 bytes")


def _decode_mutf8(raw: bytes) -> str:
    """Decode a modified-UTF-8 byte run (no terminator) to text.

    U+0000 appears as C0 80 and supplementary characters as CESU-8
    surrogate pairs of 3-byte sequences. Raises ValueError on malformed
    input.
    """
    units: list[int] = []
    i = 0
    n = len(raw)
    while i < n:
        b = raw[i]
        if b & 0x80 == 0:
            if b == 0:
                raise ValueError("embedded NUL byte")
            units.append(b)
            i += 1
        elif b & 0xE0 == 0xC0:
            if i + 1 >= n or raw[i + 1] & 0xC0 != 0x80:
                raise ValueError("bad 2-byte sequence")
            units.append(((b & 0x1F) << 6) | (raw[i + 1] & 0x3F))
            i += 2
        elif b & 0xF0 == 0xE0:
            if i + 2 >= n or raw[i + 1] & 0xC0 != 0x80 or raw[i + 2] & 0xC0 != 0x80:
                raise ValueError("bad 3-byte sequence")
            units.append(((b & 0x0F) << 12) | ((raw[i + 1] & 0x3F) << 6) | (raw[i + 2] & 0x3F))
            i += 3
        else:
            raise ValueError(f"invalid lead byte {b:#04x}")

    chars: list[str] = []
    j = 0
    while j < len(units):
        u = units[j]
        if 0xD800 <= u < 0xDC00:
            if j + 1 >= len(units) or not 0xDC00 <= units[j + 1] < 0xE000:
                raise ValueError("unpaired high surrogate")
            chars.append(chr(0x10000 + ((u - 0xD800) << 10) + (units[j + 1] - 0xDC00)))
            j += 2
        elif 0xDC00 <= u < 0xE000:
            raise ValueError("unpaired low surrogate")
        else:
            chars.append(chr(u))
            j += 1
    return "".join(chars)


def _check_range(data: bytes, off: int, length: int, what: str) -> None:
    if off < 0 or length < 0 or off + length > len(data):
        raise TruncatedError(f"{what} at {off:#x} (+{length}) exceeds file size {len(data)}")


def _read_string_data(data: bytes, off: int, index: int) -> str:
    _check_range(data, off, 1, f"string_data[{index}]")
    declared, off = _read_uleb128(data, off)
    end = data.find(b"\x00", off)
    if end < 0:
        raise TruncatedError(f"string_data[{index}] missing terminator")
    try:
        text = _decode_mutf8(data[off:end])
    except ValueError as exc:
        log.warning("string %d: undecodable MUTF-8 (%s); using empty string", index, exc)
        return ""
    # declared size counts UTF-16 units
    utf16_len = sum(2 if ord(c) > 0xFFFF else 1 for c in text)
    if utf16_len != declared:
        log.warning(
            "string %d: declared UTF-16 length %d != decoded %d; using empty string",
            index, declared, utf16_len,
        )
        return ""
    return text


def parse_dex(data: bytes) -> DexFile:
    """Parse a DEX buffer into its index tables.

    Raises BadMagicError for non-DEX input, TruncatedError when a section
    lies outside the file, and IndexOutOfBoundsError for corrupt
    cross-table references.
    """
    if not data:
        raise BadMagicError("empty input")
    if data[:4] != _MAGIC_PREFIX:
        raise BadMagicError(f"not a DEX file (magic {data[:4]!r})")
    if len(data) < 8 or data[7:8] != b"\x00":
        raise BadMagicError("malformed version field")
    version = data[4:7].decode("ascii", "replace")
    if version not in _SUPPORTED_VERSIONS:
        raise BadMagicError(f"unsupported DEX version {version!r}")
    if len(data) < _HEADER_SIZE:
        raise TruncatedError(f"file shorter than the {_HEADER_SIZE}-byte header")

    endian_tag = struct.unpack_from("<I", data, 40)[0]
    if endian_tag != _ENDIAN_CONSTANT:
        raise BadMagicError(f"unsupported endian tag {endian_tag:#010x}")

    (string_ids_size, string_ids_off,
     type_ids_size, type_ids_off,
     proto_ids_size, proto_ids_off,
     field_ids_size, field_ids_off,
     method_ids_size, method_ids_off,
     class_defs_size, class_defs_off) = struct.unpack_from("<12I", data, 56)
    header = DexHeader(
        version=version,
        endian_tag=endian_tag,
        file_size=struct.unpack_from("<I", data, 32)[0],
        string_ids=(string_ids_size, string_ids_off),
        type_ids=(type_ids_size, type_ids_off),
        proto_ids=(proto_ids_size, proto_ids_off),
        field_ids=(field_ids_size, field_ids_off),
        method_ids=(method_ids_size, method_ids_off),
        class_defs=(class_defs_size, class_defs_off),
    )

    _check_range(data, string_ids_off, 4 * string_ids_size, "string_ids")
    _check_range(data, type_ids_off, 4 * type_ids_size, "type_ids")
    _check_range(data, proto_ids_off, 12 * proto_ids_size, "proto_ids")
    _check_range(data, field_ids_off, 8 * field_ids_size, "field_ids")
    _check_range(data, method_ids_off, 8 * method_ids_size, "method_ids")
    _check_range(data, class_defs_off, 32 * class_defs_size, "class_defs")

    strings = []
    for i in range(string_ids_size):
        data_off = struct.unpack_from("<I", data, string_ids_off + 4 * i)[0]
        strings.append(_read_string_data(data, data_off, i))

    types = []
    for i in range(type_ids_size):
        descriptor_idx = struct.unpack_from("<I", data, type_ids_off + 4 * i)[0]
        if descriptor_idx >= len(strings):
            raise IndexOutOfBoundsError(f"type_ids[{i}] descriptor index {descriptor_idx}")
        types.append(strings[descriptor_idx])

    protos = []
    for i in range(proto_ids_size):
        shorty_idx, return_idx, params_off = struct.unpack_from(
            "<3I", data, proto_ids_off + 12 * i)
        if shorty_idx >= len(strings):
            raise IndexOutOfBoundsError(f"proto_ids[{i}] shorty index {shorty_idx}")
        if return_idx >= len(types):
            raise IndexOutOfBoundsError(f"proto_ids[{i}] return type index {return_idx}")
        protos.append((shorty_idx, return_idx, params_off))

    methods = []
    for i in range(method_ids_size):
        class_idx, proto_idx, name_idx = struct.unpack_from(
            "<HHI", data, method_ids_off + 8 * i)
        if class_idx >= len(types):
            raise IndexOutOfBoundsError(f"method_ids[{i}] class index {class_idx}")
        if proto_idx >= len(protos):
            raise IndexOutOfBoundsError(f"method_ids[{i}] proto index {proto_idx}")
        if name_idx >= len(strings):
            raise IndexOutOfBoundsError(f"method_ids[{i}] name index {name_idx}")
        methods.append(MethodRef(class_idx, proto_idx, name_idx))

    class_defs = []
    for i in range(class_defs_size):
        off = class_defs_off + 32 * i
        class_idx = struct.unpack_from("<I", data, off)[0]
        class_data_off = struct.unpack_from("<I", data, off + 24)[0]
        if class_idx >= len(types):
            raise IndexOutOfBoundsError(f"class_defs[{i}] class index {class_idx}")
        direct, virtual = _parse_class_data(data, class_data_off, len(methods), i)
        class_defs.append(ClassDef(class_idx, direct, virtual))

    return DexFile(
        header=header,
        data=bytes(data),
        strings=tuple(strings),
        types=tuple(types),
        protos=tuple(protos),
        methods=tuple(methods),
        class_defs=tuple(class_defs),
    )


def _parse_class_data(
    data: bytes, off: int, method_count: int, class_no: int,
) -> tuple[tuple[EncodedMethodRef, ...], tuple[EncodedMethodRef, ...]]:
    if off == 0:
        return (), ()
    _check_range(data, off, 1, f"class_data[{class_no}]")
    static_fields, off = _read_uleb128(data, off)
    instance_fields, off = _read_uleb128(data, off)
    direct_size, off = _read_uleb128(data, off)
    virtual_size, off = _read_uleb128(data, off)
    for _ in range(static_fields + instance_fields):
        _, off = _read_uleb128(data, off)      # field_idx_diff
        _, off = _read_uleb128(data, off)      # access_flags

    def read_methods(count: int) -> tuple[tuple[EncodedMethodRef, ...], int]:
        out = []
        idx = 0
        o = off
        for _ in range(count):
            diff, o = _read_uleb128(data, o)
            flags, o = _read_uleb128(data, o)
            code_off, o = _read_uleb128(data, o)
            idx += diff
            if idx >= method_count:
                raise IndexOutOfBoundsError(
                    f"class_data[{class_no}] method index {idx} of {method_count}")
            out.append(EncodedMethodRef(idx, flags, code_off))
        return tuple(out), o

    direct, off = read_methods(direct_size)
    virtual, off = read_methods(virtual_size)
    return direct, virtual


def extract_code_tokens(dex: DexFile) -> list[RawToken]:
    """Walk every code item and emit API and string tokens in code order.

    Classes are visited in file order, direct methods before virtual ones,
    each in encoded order. A method whose instruction stream cannot be
    decoded (unknown opcode, truncated instruction, bad operand index) is
    skipped with a warning; the rest of the file is still processed.
    """
    tokens: list[RawToken] = []
    for class_def in dex.class_defs:
        for m in class_def.direct_methods + class_def.virtual_methods:
            if m.code_off == 0:
                continue
            _method_tokens(dex, m, tokens)
    return tokens


def _method_tokens(dex: DexFile, m: EncodedMethodRef, tokens: list[RawToken]) -> None:
    data = dex.data
    where = dex.api_token(m.method_idx)
    try:
        _check_range(data, m.code_off, 16, f"code_item of {where}")
    except TruncatedError as exc:
        log.warning("skipping method %s: %s", where, exc)
        return
    insns_size = struct.unpack_from("<I", data, m.code_off + 12)[0]
    insns_off = m.code_off + 16
    try:
        _check_range(data, insns_off, 2 * insns_size, f"insns of {where}")
    except TruncatedError as exc:
        log.warning("skipping method %s: %s", where, exc)
        return
    insns = struct.unpack_from(f"<{insns_size}H", data, insns_off)

    emitted: list[RawToken] = []
    pos = 0
    while pos < insns_size:
        unit = insns[pos]
        op = unit & 0xFF
        if op == 0x00 and unit >> 8 in (
                _PAYLOAD_PACKED_SWITCH, _PAYLOAD_SPARSE_SWITCH, _PAYLOAD_FILL_ARRAY):
            width = _payload_width(insns, pos, unit >> 8)
        else:
            width = _WIDTHS[op]
        if width == 0:
            log.warning("method %s: unknown opcode %#04x at unit %d; "
                        "dropping its tokens", where, op, pos)
            return
        if pos + width > insns_size:
            log.warning("method %s: instruction %#04x at unit %d runs past "
                        "the code item; dropping its tokens", where, op, pos)
            return

        if op in _INVOKE_OPS:
            method_idx = insns[pos + 1]
            if method_idx >= len(dex.methods):
                log.warning("method %s: invoke target %d out of range; "
                            "dropping its tokens", where, method_idx)
                return
            emitted.append(RawToken(TokenKind.API, dex.api_token(method_idx), 0))
        elif op == _OP_CONST_STRING or op == _OP_CONST_STRING_JUMBO:
            if op == _OP_CONST_STRING:
                string_idx = insns[pos + 1]
            else:
                string_idx = insns[pos + 1] | (insns[pos + 2] << 16)
            if string_idx >= len(dex.strings):
                log.warning("method %s: string index %d out of range; "
                            "dropping its tokens", where, string_idx)
                return
            emitted.append(RawToken(TokenKind.STRING, dex.strings[string_idx], 0))
        pos += width

    base = len(tokens)
    tokens.extend(
        RawToken(t.kind, t.text, base + i) for i, t in enumerate(emitted))


def _payload_width(insns: tuple[int, ...], pos: int, ident: int) -> int:
    if pos + 2 > len(insns):
        return 0
    if ident == _PAYLOAD_PACKED_SWITCH:
        size = insns[pos + 1]
        return size * 2 + 4
    if ident == _PAYLOAD_SPARSE_SWITCH:
        size = insns[pos + 1]
        return size * 4 + 2
    # fill-array-data: element width then a 32-bit element count
    if pos + 4 > len(insns):
        return 0
    element_width = insns[pos + 1]
    count = insns[pos + 2] | (insns[pos + 3] << 16)
    return (count * element_width + 1) // 2 + 4


def dump_tokens(tokens: list[RawToken]) -> str:
    """Debug dump: one token per line, "<kind>\\t<text>"."""
    return "".join(f"{t.kind.value}\t{t.text}\n" for t in tokens)
