"""Minimal protobuf wire-format reader.

Only what decoding ONNX model files requires: varints, length-delimited
fields, and the two fixed widths. Field semantics live in the caller;
this module is schema-agnostic. Deprecated group wire types are
rejected.
"""


class WireError(ValueError):
    """Malformed protobuf bytes."""


def read_varint(buf, pos: int):
    """Decode one base-128 varint at pos; returns (value, new_pos)."""
    result = 0
    shift = 0
    n = len(buf)
    while True:
        if pos >= n:
            raise WireError("truncated varint")
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise WireError("varint exceeds 64 bits")


def to_int64(value: int) -> int:
    """Reinterpret an unsigned varint as two's-complement int64."""
    return value - (1 << 64) if value >= 1 << 63 else value


def iter_fields(buf):
    """Yield (field_number, wire_type, payload) for one message.

    Payload is an int for wire type 0 and a bytes-like slice for types
    1, 2, and 5. buf should be a memoryview to keep slices zero-copy.
    """
    pos = 0
    n = len(buf)
    while pos < n:
        key, pos = read_varint(buf, pos)
        field, wire = key >> 3, key & 7
        if field == 0:
            raise WireError("field number 0")
        if wire == 0:
            value, pos = read_varint(buf, pos)
        elif wire == 2:
            length, pos = read_varint(buf, pos)
            if pos + length > n:
                raise WireError("truncated length-delimited field")
            value = buf[pos : pos + length]
            pos += length
        elif wire == 5:
            value = buf[pos : pos + 4]
            pos += 4
        elif wire == 1:
            value = buf[pos : pos + 8]
            pos += 8
        else:
            raise WireError(f"unsupported wire type {wire}")
        if pos > n:
            raise WireError("truncated fixed-width field")
        yield field, wire, value


def repeated_int64(wire: int, value) -> list:
    """Decode a repeated int64 field that may arrive packed or not."""
    if wire == 0:
        return [to_int64(value)]
    out = []
    pos = 0
    while pos < len(value):
        raw, pos = read_varint(value, pos)
        out.append(to_int64(raw))
    return out
