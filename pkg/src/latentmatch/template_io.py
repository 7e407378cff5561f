"""Binary template files: bit-exact, little-endian, magic ``LFRT``.

Layout (version 1): magic (4 bytes), version (u16), kind (u8), then typed
sections.  All floats are IEEE 754 float64 little-endian so that
``load(save(t))`` reproduces ``t`` bit-exactly and a re-save emits identical
bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (MagicMismatchError, TemplateFormatError,
                     TruncatedPayloadError, VersionMismatchError)
from .model import (Descriptor, Minutia, MinutiaKind, MinutiaeTemplate,
                    OrientationField, TemplateVariant, TextureSide,
                    TextureTemplate)

MAGIC = b"LFRT"
VERSION = 1

_KIND_MINUTIAE = 1
_KIND_TEXTURE = 2

_VARIANT_CODES = {
    TemplateVariant.LATENT_1: 1,
    TemplateVariant.LATENT_2: 2,
    TemplateVariant.REFERENCE: 3,
}
_VARIANT_FROM_CODE = {v: k for k, v in _VARIANT_CODES.items()}

_SIDE_CODES = {TextureSide.LATENT: 1, TextureSide.REFERENCE: 2}
_SIDE_FROM_CODE = {v: k for k, v in _SIDE_CODES.items()}

_MINUTIA_KIND_CODES = {MinutiaKind.TRUE: 1, MinutiaKind.VIRTUAL: 2}
_MINUTIA_KIND_FROM_CODE = {v: k for k, v in _MINUTIA_KIND_CODES.items()}


class _Writer:
    def __init__(self):
        self._chunks: list[bytes] = []

    def u8(self, v): self._chunks.append(struct.pack("<B", v))
    def u16(self, v): self._chunks.append(struct.pack("<H", v))
    def u32(self, v): self._chunks.append(struct.pack("<I", v))
    def f64(self, v): self._chunks.append(struct.pack("<d", v))

    def text(self, s: str):
        data = s.encode("utf-8")
        if len(data) > 0xFFFF:
            raise TemplateFormatError("string too long for template file")
        self.u16(len(data))
        self._chunks.append(data)

    def f64_array(self, arr: np.ndarray):
        self._chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    def bool_array(self, arr: np.ndarray):
        self._chunks.append(
            np.ascontiguousarray(arr, dtype=np.uint8).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self._chunks)


class _Reader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise TruncatedPayloadError(
                f"needed {n} bytes at offset {self._pos}, file has "
                f"{len(self._data)}")
        out = self._data[self._pos:self._pos + n]
        self._pos += n
        return out

    def u8(self): return struct.unpack("<B", self.take(1))[0]
    def u16(self): return struct.unpack("<H", self.take(2))[0]
    def u32(self): return struct.unpack("<I", self.take(4))[0]
    def f64(self): return struct.unpack("<d", self.take(8))[0]

    def text(self) -> str:
        n = self.u16()
        return self.take(n).decode("utf-8")

    def f64_array(self, count: int) -> np.ndarray:
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64)

    def bool_array(self, count: int) -> np.ndarray:
        raw = self.take(count)
        return np.frombuffer(raw, dtype=np.uint8).astype(bool)

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)


def _write_minutiae(w: _Writer, minutiae: list[Minutia]):
    w.u32(len(minutiae))
    for m in minutiae:
        w.f64(m.x)
        w.f64(m.y)
        w.f64(m.alpha)
        w.u8(_MINUTIA_KIND_CODES[m.kind])


def _read_minutiae(r: _Reader) -> list[Minutia]:
    count = r.u32()
    out = []
    for _ in range(count):
        x, y, alpha = r.f64(), r.f64(), r.f64()
        code = r.u8()
        if code not in _MINUTIA_KIND_FROM_CODE:
            raise TemplateFormatError(f"unknown minutia kind code {code}")
        out.append(Minutia(x, y, alpha, _MINUTIA_KIND_FROM_CODE[code]))
    return out


def _write_descriptors(w: _Writer, descriptors: list[Descriptor]):
    w.u32(len(descriptors))
    type_ids = descriptors[0].patch_type_ids if descriptors else ()
    w.u8(len(type_ids))
    for pt in type_ids:
        vectors = [d.vector(pt) for d in descriptors]
        dim = vectors[0].shape[0]
        w.text(pt)
        w.u32(dim)
        w.f64_array(np.stack(vectors))


def _read_descriptors(r: _Reader) -> list[Descriptor]:
    count = r.u32()
    n_types = r.u8()
    per_type: dict[str, np.ndarray] = {}
    for _ in range(n_types):
        pt = r.text()
        dim = r.u32()
        per_type[pt] = r.f64_array(count * dim).reshape(count, dim)
    return [
        Descriptor({pt: mat[i] for pt, mat in per_type.items()})
        for i in range(count)
    ]


def _write_field(w: _Writer, of: OrientationField):
    w.u16(of.block_size)
    w.u32(of.width_blocks)
    w.u32(of.height_blocks)
    w.f64_array(of.theta)
    w.bool_array(of.mask)


def _read_field(r: _Reader) -> OrientationField:
    block_size = r.u16()
    width = r.u32()
    height = r.u32()
    theta = r.f64_array(width * height).reshape(height, width)
    mask = r.bool_array(width * height).reshape(height, width)
    return OrientationField(block_size=block_size, theta=theta, mask=mask)


def template_to_bytes(t: MinutiaeTemplate | TextureTemplate) -> bytes:
    w = _Writer()
    w._chunks.append(MAGIC)
    w.u16(VERSION)
    if isinstance(t, MinutiaeTemplate):
        w.u8(_KIND_MINUTIAE)
        w.text(t.source_id)
        w.u8(_VARIANT_CODES[t.variant])
        _write_field(w, t.orientation_field)
        _write_minutiae(w, t.minutiae)
        _write_descriptors(w, t.descriptors)
    elif isinstance(t, TextureTemplate):
        w.u8(_KIND_TEXTURE)
        w.text(t.source_id)
        w.u8(_SIDE_CODES[t.side])
        w.u32(t.width_px)
        w.u32(t.height_px)
        w.u16(t.block_size)
        _write_minutiae(w, t.virtual_minutiae)
        _write_descriptors(w, t.descriptors)
    else:
        raise TypeError(f"not a template: {type(t)!r}")
    return w.getvalue()


def template_from_bytes(data: bytes) -> MinutiaeTemplate | TextureTemplate:
    r = _Reader(data)
    magic = r.take(4)
    if magic != MAGIC:
        raise MagicMismatchError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u16()
    if version != VERSION:
        raise VersionMismatchError(
            f"unsupported template version {version}, expected {VERSION}")
    kind = r.u8()
    if kind == _KIND_MINUTIAE:
        source_id = r.text()
        variant_code = r.u8()
        if variant_code not in _VARIANT_FROM_CODE:
            raise TemplateFormatError(f"unknown variant code {variant_code}")
        of = _read_field(r)
        minutiae = _read_minutiae(r)
        descriptors = _read_descriptors(r)
        out = MinutiaeTemplate(minutiae=minutiae, descriptors=descriptors,
                               orientation_field=of, source_id=source_id,
                               variant=_VARIANT_FROM_CODE[variant_code])
    elif kind == _KIND_TEXTURE:
        source_id = r.text()
        side_code = r.u8()
        if side_code not in _SIDE_FROM_CODE:
            raise TemplateFormatError(f"unknown side code {side_code}")
        width = r.u32()
        height = r.u32()
        block_size = r.u16()
        minutiae = _read_minutiae(r)
        descriptors = _read_descriptors(r)
        out = TextureTemplate(virtual_minutiae=minutiae,
                              descriptors=descriptors, source_id=source_id,
                              side=_SIDE_FROM_CODE[side_code],
                              width_px=width, height_px=height,
                              block_size=block_size)
    else:
        raise TemplateFormatError(f"unknown template kind {kind}")
    if not r.exhausted:
        raise TemplateFormatError("trailing bytes after template payload")
    return out


def save_template(t: MinutiaeTemplate | TextureTemplate, path) -> None:
    Path(path).write_bytes(template_to_bytes(t))


def load_template(path) -> MinutiaeTemplate | TextureTemplate:
    return template_from_bytes(Path(path).read_bytes())


def templates_equal(a, b) -> bool:
    """Bit-exact equality of two templates (field by field)."""
    if type(a) is not type(b):
        return False
    return template_to_bytes(a) == template_to_bytes(b)
