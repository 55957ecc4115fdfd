"""Canonical, self-describing binary encoding.

Every payload that gets signed, hashed or written to a trace goes through
:func:`encode`.  The format is length-prefixed and field-order-fixed, so two
equal objects always produce the same bytes and the bytes decode back to an
equal object.  Dataclasses take part by registering with :func:`wire`.
"""

from __future__ import annotations

import dataclasses
import struct
from fractions import Fraction

_REGISTRY: dict[str, type] = {}
_TAGS: dict[type, str] = {}


class _Undecided:
    """Sentinel for a decision variable that has not been assigned yet."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDECIDED"

    def __reduce__(self):
        return (_Undecided, ())


UNDECIDED = _Undecided()


class DecodeError(ValueError):
    pass


def wire(cls):
    """Class decorator registering a dataclass with the codec under its name."""
    name = cls.__name__
    if name in _REGISTRY and _REGISTRY[name] is not cls:
        raise ValueError(f"duplicate wire tag {name}")
    _REGISTRY[name] = cls
    _TAGS[cls] = name
    cls._wire_fields = tuple(f.name for f in dataclasses.fields(cls))
    return cls


def _len(n: int) -> bytes:
    return struct.pack(">I", n)


def _enc(obj, out: list) -> None:
    if obj is None:
        out.append(b"N")
    elif obj is UNDECIDED:
        out.append(b"U")
    elif obj is True or obj is False:
        out.append(b"1" if obj else b"0")
    elif isinstance(obj, int):
        raw = obj.to_bytes((obj.bit_length() + 8) // 8 or 1, "big", signed=True)
        out.append(b"I" + _len(len(raw)) + raw)
    elif isinstance(obj, bytes):
        out.append(b"B" + _len(len(obj)) + obj)
    elif isinstance(obj, str):
        raw = obj.encode()
        out.append(b"S" + _len(len(raw)) + raw)
    elif isinstance(obj, Fraction):
        out.append(b"Q")
        _enc(obj.numerator, out)
        _enc(obj.denominator, out)
    elif isinstance(obj, tuple):
        out.append(b"T" + _len(len(obj)))
        for item in obj:
            _enc(item, out)
    elif isinstance(obj, frozenset):
        items = sorted(encode(item) for item in obj)
        out.append(b"F" + _len(len(items)))
        out.extend(items)
    elif type(obj) in _TAGS:
        cached = obj.__dict__.get("_canon")
        if cached is not None:
            out.append(cached)
            return
        tag = _TAGS[type(obj)].encode()
        parts = [b"D" + _len(len(tag)) + tag]
        for name in obj._wire_fields:
            _enc(getattr(obj, name), parts)
        raw = b"".join(parts)
        # frozen dataclasses: bypass __setattr__ to memoise the encoding
        object.__setattr__(obj, "_canon", raw)
        out.append(raw)
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def encode(obj) -> bytes:
    out: list = []
    _enc(obj, out)
    return b"".join(out)


def _dec(buf: bytes, pos: int):
    try:
        tag = buf[pos : pos + 1]
        pos += 1
        if tag == b"N":
            return None, pos
        if tag == b"U":
            return UNDECIDED, pos
        if tag in (b"0", b"1"):
            return tag == b"1", pos
        if tag in (b"I", b"B", b"S"):
            (size,) = struct.unpack_from(">I", buf, pos)
            pos += 4
            raw = buf[pos : pos + size]
            if len(raw) != size:
                raise DecodeError("truncated")
            pos += size
            if tag == b"I":
                return int.from_bytes(raw, "big", signed=True), pos
            if tag == b"B":
                return bytes(raw), pos
            return raw.decode(), pos
        if tag == b"Q":
            num, pos = _dec(buf, pos)
            den, pos = _dec(buf, pos)
            return Fraction(num, den), pos
        if tag in (b"T", b"F"):
            (count,) = struct.unpack_from(">I", buf, pos)
            pos += 4
            items = []
            for _ in range(count):
                item, pos = _dec(buf, pos)
                items.append(item)
            return (tuple(items) if tag == b"T" else frozenset(items)), pos
        if tag == b"D":
            (size,) = struct.unpack_from(">I", buf, pos)
            pos += 4
            name = buf[pos : pos + size].decode()
            pos += size
            cls = _REGISTRY.get(name)
            if cls is None:
                raise DecodeError(f"unknown wire tag {name!r}")
            values = []
            for _ in cls._wire_fields:
                value, pos = _dec(buf, pos)
                values.append(value)
            return cls(*values), pos
    except struct.error as exc:
        raise DecodeError(str(exc)) from exc
    raise DecodeError(f"bad tag {tag!r} at {pos - 1}")


def decode(buf: bytes):
    obj, pos = _dec(buf, 0)
    if pos != len(buf):
        raise DecodeError("trailing bytes")
    return obj


def registered_types() -> dict[str, type]:
    return dict(_REGISTRY)
