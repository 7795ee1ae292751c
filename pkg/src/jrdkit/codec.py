"""Block-adaptive baseline JPEG codec.

Spatial adaptivity works entirely on the encoder side: every 16x16 macroblock
carries its own quality factor, coefficients are quantized with that block's
tables, dequantized, then requantized with the tables of the file-level
quality factor (the maximum over the map).  The scan therefore stays a plain
baseline JPEG that any decoder reads with the file tables; the per-block map
travels in an application segment for inspection only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .core import ImagePlane

QFMAP_MAGIC = b"JRDQ"
QFMAP_VERSION = 1
_QFMAP_MARKER = 0xEB  # APP11

_BASE_LUMA = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)

_BASE_CHROMA = np.array([
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
], dtype=np.int64)

ZIGZAG = np.array([
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
], dtype=np.int64)

_DC_LUMA_BITS = (0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0)
_DC_LUMA_VALS = tuple(range(12))
_DC_CHROMA_BITS = (0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0)
_DC_CHROMA_VALS = tuple(range(12))

_AC_LUMA_BITS = (0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D)
_AC_LUMA_VALS = (
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12,
    0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08,
    0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0A, 0x16,
    0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
    0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79,
    0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98,
    0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7,
    0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6,
    0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5,
    0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4,
    0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA,
    0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
)
_AC_CHROMA_BITS = (0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77)
_AC_CHROMA_VALS = (
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21,
    0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71,
    0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91,
    0xA1, 0xB1, 0xC1, 0x09, 0x23, 0x33, 0x52, 0xF0,
    0x15, 0x62, 0x72, 0xD1, 0x0A, 0x16, 0x24, 0x34,
    0xE1, 0x25, 0xF1, 0x17, 0x18, 0x19, 0x1A, 0x26,
    0x27, 0x28, 0x29, 0x2A, 0x35, 0x36, 0x37, 0x38,
    0x39, 0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48,
    0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
    0x59, 0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68,
    0x69, 0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78,
    0x79, 0x7A, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
    0x88, 0x89, 0x8A, 0x92, 0x93, 0x94, 0x95, 0x96,
    0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5,
    0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4,
    0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3,
    0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2,
    0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA,
    0xE2, 0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9,
    0xEA, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
)


class DecodeError(ValueError):
    """Raised for malformed streams; `offset` is the failing byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class QuantTables:
    luma: np.ndarray  # (8, 8) int
    chroma: np.ndarray  # (8, 8) int


def qf_to_tables(qf: int) -> QuantTables:
    """Scale the reference quantization tables to a quality factor in 1..100."""
    if not 1 <= qf <= 100:
        raise ValueError(f"qf out of range: {qf}")
    scale = 5000 // qf if qf < 50 else 200 - 2 * qf
    luma = np.clip((_BASE_LUMA * scale + 50) // 100, 1, 255)
    chroma = np.clip((_BASE_CHROMA * scale + 50) // 100, 1, 255)
    return QuantTables(luma=luma, chroma=chroma)


@dataclass(frozen=True)
class QfMap:
    """Per-macroblock quality factors on the ceil(image/16) grid."""

    qf: np.ndarray  # (blocks_h, blocks_w) int

    def __post_init__(self):
        q = self.qf
        if q.ndim != 2 or q.size == 0:
            raise ValueError("qf map must be a non-empty 2-d array")
        if q.min() < 1 or q.max() > 100:
            raise ValueError(f"qf values out of range: {q.min()}..{q.max()}")

    @property
    def blocks_w(self) -> int:
        return self.qf.shape[1]

    @property
    def blocks_h(self) -> int:
        return self.qf.shape[0]

    @property
    def file_qf(self) -> int:
        return int(self.qf.max())

    @classmethod
    def uniform(cls, qf: int, image_w: int, image_h: int) -> QfMap:
        shape = (-(-image_h // 16), -(-image_w // 16))
        return cls(qf=np.full(shape, qf, dtype=np.int64))


def rasterize_qfmap(
    regions: list[tuple], background_qf: int, image_w: int, image_h: int
) -> QfMap:
    """Burn (box, qf) regions onto the macroblock grid.

    Every macroblock intersecting a region takes the region's qf; where
    regions overlap the larger qf wins; untouched blocks keep background_qf.
    """
    bw = -(-image_w // 16)
    bh = -(-image_h // 16)
    grid = np.full((bh, bw), background_qf, dtype=np.int64)
    for box, qf in regions:
        if not 1 <= qf <= 100:
            raise ValueError(f"region qf out of range: {qf}")
        x0, y0, x1, y1 = box.as_xyxy()
        cx0 = max(0, int(np.floor(x0 / 16)))
        cy0 = max(0, int(np.floor(y0 / 16)))
        cx1 = min(bw, int(np.ceil(x1 / 16)))
        cy1 = min(bh, int(np.ceil(y1 / 16)))
        if cx1 <= cx0 or cy1 <= cy0:
            continue
        cell = grid[cy0:cy1, cx0:cx1]
        np.maximum(cell, qf, out=cell)
    return QfMap(qf=grid)


@dataclass(frozen=True)
class Bitstream:
    """An encoded image plus the header facts needed without re-parsing."""

    data: bytes
    width: int
    height: int
    channels: int
    qfmap: QfMap | None = field(default=None, compare=False)


def _dct_matrix() -> np.ndarray:
    u = np.arange(8)[:, None]
    x = np.arange(8)[None, :]
    m = np.cos((2 * x + 1) * u * np.pi / 16) / 2.0
    m[0, :] = 1.0 / np.sqrt(8.0)
    return m

_DCT = _dct_matrix()


def _blockify(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)


def _deblockify(blocks: np.ndarray) -> np.ndarray:
    bh, bw = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)


def _pad_edge(plane: np.ndarray, multiple: int) -> np.ndarray:
    h, w = plane.shape[:2]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return plane
    pad = [(0, ph), (0, pw)] + [(0, 0)] * (plane.ndim - 2)
    return np.pad(plane, pad, mode="edge")


def _rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    r = rgb[:, :, 0].astype(np.float64)
    g = rgb[:, :, 1].astype(np.float64)
    b = rgb[:, :, 2].astype(np.float64)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return np.stack([y, cb, cr], axis=2)


def _ycbcr_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> np.ndarray:
    cb = cb - 128.0
    cr = cr - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    rgb = np.stack([r, g, b], axis=2)
    return np.clip(np.round(rgb), 0, 255).astype(np.uint8)


def _quantize_component(
    plane: np.ndarray, block_qf: np.ndarray, file_tbl: np.ndarray, tbl_of_qf
) -> np.ndarray:
    """Quantize/requantize all 8x8 blocks, returning zigzag coefficients.

    `block_qf` assigns a quality factor to every block of this component.
    Coefficient magnitudes are clipped to what the baseline magnitude
    categories can carry (10 bits for AC, and DC kept small enough that the
    differentials fit 11 bits).
    """
    blocks = _blockify(plane - 128.0)
    coefs = _DCT @ blocks @ _DCT.T
    out = np.empty(blocks.shape, dtype=np.int64)
    for qf in np.unique(block_qf):
        tbl = tbl_of_qf(int(qf))
        sel = block_qf == qf
        coarse = np.round(coefs[sel] / tbl)
        out[sel] = np.round(coarse * tbl / file_tbl).astype(np.int64)
    flat = out.reshape(-1, 64)[:, ZIGZAG]
    np.clip(flat, -1023, 1023, out=flat)
    return flat.reshape(block_qf.shape[0], block_qf.shape[1], 64)


def _build_codes(bits, values) -> dict[int, tuple[int, int]]:
    codes = {}
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            codes[values[k]] = (code, length)
            code += 1
            k += 1
        code <<= 1
    return codes

_DC_LUMA_CODES = _build_codes(_DC_LUMA_BITS, _DC_LUMA_VALS)
_DC_CHROMA_CODES = _build_codes(_DC_CHROMA_BITS, _DC_CHROMA_VALS)
_AC_LUMA_CODES = _build_codes(_AC_LUMA_BITS, _AC_LUMA_VALS)
_AC_CHROMA_CODES = _build_codes(_AC_CHROMA_BITS, _AC_CHROMA_VALS)


class _BitWriter:
    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.nbits = 0

    def write(self, value: int, length: int):
        self.acc = (self.acc << length) | value
        self.nbits += length
        while self.nbits >= 8:
            byte = (self.acc >> (self.nbits - 8)) & 0xFF
            self.out.append(byte)
            if byte == 0xFF:
                self.out.append(0x00)  # stuffing
            self.nbits -= 8
        self.acc &= (1 << self.nbits) - 1

    def flush(self):
        if self.nbits:
            pad = 8 - self.nbits
            self.write((1 << pad) - 1, pad)


def _encode_block(zz, pred: int, dc_codes, ac_codes, writer: _BitWriter) -> int:
    dc = int(zz[0])
    diff = dc - pred
    mag = abs(diff)
    size = mag.bit_length()
    code, length = dc_codes[size]
    if size:
        amp = diff if diff >= 0 else diff + (1 << size) - 1
        writer.write((code << size) | amp, length + size)
    else:
        writer.write(code, length)
    run = 0
    for k in range(1, 64):
        v = int(zz[k])
        if v == 0:
            run += 1
            continue
        while run > 15:
            zrl, zlen = ac_codes[0xF0]
            writer.write(zrl, zlen)
            run -= 16
        size = abs(v).bit_length()
        code, length = ac_codes[(run << 4) | size]
        amp = v if v >= 0 else v + (1 << size) - 1
        writer.write((code << size) | amp, length + size)
        run = 0
    if run:
        eob, elen = ac_codes[0x00]
        writer.write(eob, elen)
    return dc


def _segment(marker: int, payload: bytes) -> bytes:
    return bytes([0xFF, marker]) + struct.pack(">H", len(payload) + 2) + payload


def _qfmap_segment(qfmap: QfMap) -> bytes:
    flat = qfmap.qf.astype(np.uint8).tobytes()
    if len(flat) > 65524:
        raise ValueError(f"qf map too large for one segment: {qfmap.qf.shape}")
    payload = QFMAP_MAGIC + bytes([QFMAP_VERSION])
    payload += struct.pack(">HH", qfmap.blocks_w, qfmap.blocks_h) + flat
    return _segment(_QFMAP_MARKER, payload)


def _dqt_segment(tables: QuantTables, color: bool) -> bytes:
    def one(tbl, ident):
        return bytes([ident]) + tbl.reshape(64)[ZIGZAG].astype(np.uint8).tobytes()

    payload = one(tables.luma, 0)
    if color:
        payload += one(tables.chroma, 1)
    return _segment(0xDB, payload)


def _dht_segment(color: bool) -> bytes:
    def one(cls, ident, bits, values):
        return bytes([(cls << 4) | ident]) + bytes(bits) + bytes(values)

    payload = one(0, 0, _DC_LUMA_BITS, _DC_LUMA_VALS)
    payload += one(1, 0, _AC_LUMA_BITS, _AC_LUMA_VALS)
    if color:
        payload += one(0, 1, _DC_CHROMA_BITS, _DC_CHROMA_VALS)
        payload += one(1, 1, _AC_CHROMA_BITS, _AC_CHROMA_VALS)
    return _segment(0xC4, payload)


def encode(image: ImagePlane, qfmap: QfMap) -> Bitstream:
    """Encode with per-macroblock quality; the scan itself is plain baseline.

    The map must cover the image on the ceil(dimension/16) grid.  Color input
    is coded 4:2:0, single-channel input as one component.
    """
    w, h = image.width, image.height
    want = (-(-h // 16), -(-w // 16))
    if qfmap.qf.shape != want:
        raise ValueError(f"qf map shape {qfmap.qf.shape} does not cover image grid {want}")
    color = image.channels == 3
    file_qf = qfmap.file_qf
    file_tables = qf_to_tables(file_qf)
    luma_of = lambda q: qf_to_tables(q).luma
    chroma_of = lambda q: qf_to_tables(q).chroma

    if color:
        padded = _pad_edge(image.pixels, 16)
        ycc = _rgb_to_ycbcr(padded)
        y = ycc[:, :, 0]
        cb = ycc[0::2, 0::2, 1] + ycc[0::2, 1::2, 1] + ycc[1::2, 0::2, 1] + ycc[1::2, 1::2, 1]
        cr = ycc[0::2, 0::2, 2] + ycc[0::2, 1::2, 2] + ycc[1::2, 0::2, 2] + ycc[1::2, 1::2, 2]
        cb = cb / 4.0
        cr = cr / 4.0
        # Luma blocks are half the size of map cells, chroma blocks match them.
        y_qf = np.repeat(np.repeat(qfmap.qf, 2, axis=0), 2, axis=1)
        zz_y = _quantize_component(y, y_qf, file_tables.luma, luma_of)
        zz_cb = _quantize_component(cb, qfmap.qf, file_tables.chroma, chroma_of)
        zz_cr = _quantize_component(cr, qfmap.qf, file_tables.chroma, chroma_of)
    else:
        plane = _pad_edge(image.pixels[:, :, 0], 8).astype(np.float64)
        gh, gw = plane.shape[0] // 8, plane.shape[1] // 8
        rows = np.minimum(np.arange(gh) // 2, qfmap.blocks_h - 1)
        cols = np.minimum(np.arange(gw) // 2, qfmap.blocks_w - 1)
        g_qf = qfmap.qf[np.ix_(rows, cols)]
        zz_y = _quantize_component(plane, g_qf, file_tables.luma, luma_of)

    head = bytearray()
    head += b"\xff\xd8"  # SOI
    head += _segment(0xE0, b"JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00")
    head += _qfmap_segment(qfmap)
    head += _dqt_segment(file_tables, color)
    if color:
        frame = struct.pack(">BHHB", 8, h, w, 3)
        frame += bytes([1, 0x22, 0]) + bytes([2, 0x11, 1]) + bytes([3, 0x11, 1])
    else:
        frame = struct.pack(">BHHB", 8, h, w, 1) + bytes([1, 0x11, 0])
    head += _segment(0xC0, frame)
    head += _dht_segment(color)
    if color:
        scan_hdr = bytes([3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0])
    else:
        scan_hdr = bytes([1, 1, 0x00, 0, 63, 0])
    head += _segment(0xDA, scan_hdr)

    writer = _BitWriter()
    if color:
        pred = [0, 0, 0]
        for my in range(qfmap.blocks_h):
            for mx in range(qfmap.blocks_w):
                for by, bx in ((0, 0), (0, 1), (1, 0), (1, 1)):
                    pred[0] = _encode_block(
                        zz_y[2 * my + by, 2 * mx + bx], pred[0],
                        _DC_LUMA_CODES, _AC_LUMA_CODES, writer,
                    )
                pred[1] = _encode_block(
                    zz_cb[my, mx], pred[1], _DC_CHROMA_CODES, _AC_CHROMA_CODES, writer
                )
                pred[2] = _encode_block(
                    zz_cr[my, mx], pred[2], _DC_CHROMA_CODES, _AC_CHROMA_CODES, writer
                )
    else:
        pred_y = 0
        for by in range(zz_y.shape[0]):
            for bx in range(zz_y.shape[1]):
                pred_y = _encode_block(
                    zz_y[by, bx], pred_y, _DC_LUMA_CODES, _AC_LUMA_CODES, writer
                )
    writer.flush()

    data = bytes(head) + bytes(writer.out) + b"\xff\xd9"
    return Bitstream(data=data, width=w, height=h, channels=image.channels, qfmap=qfmap)


def encode_uniform(image: ImagePlane, qf: int) -> Bitstream:
    return encode(image, QfMap.uniform(qf, image.width, image.height))


def _build_decode_lut(bits, values):
    sym = np.full(65536, -1, dtype=np.int32)
    ln = np.zeros(65536, dtype=np.int32)
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            lo = code << (16 - length)
            sym[lo : lo + (1 << (16 - length))] = values[k]
            ln[lo : lo + (1 << (16 - length))] = length
            code += 1
            k += 1
        code <<= 1
    return sym, ln


class _BitReader:
    """MSB-first reader over a destuffed scan, with 16-bit lookahead."""

    def __init__(self, data: bytes, base_offset: int):
        self.data = data
        self.base = base_offset
        self.total_bits = len(data) * 8
        self.consumed = 0
        self.pos = 0
        self.acc = 0
        self.nbits = 0

    def peek16(self) -> int:
        while self.nbits < 16:
            if self.pos < len(self.data):
                self.acc = (self.acc << 8) | self.data[self.pos]
                self.pos += 1
            else:
                self.acc = (self.acc << 8) | 0xFF  # virtual padding
            self.nbits += 8
        return (self.acc >> (self.nbits - 16)) & 0xFFFF

    def skip(self, n: int):
        self.consumed += n
        if self.consumed > self.total_bits:
            raise DecodeError("scan data exhausted", self.base + len(self.data))
        self.nbits -= n
        self.acc &= (1 << self.nbits) - 1

    def read(self, n: int) -> int:
        if n == 0:
            return 0
        v = self.peek16() >> (16 - n)
        self.skip(n)
        return v

    @property
    def offset(self) -> int:
        return self.base + self.consumed // 8


def _extend(bits: int, size: int) -> int:
    if bits >> (size - 1):
        return bits
    return bits - (1 << size) + 1


def _decode_block(reader: _BitReader, dc_lut, ac_lut, pred: int) -> tuple[np.ndarray, int]:
    zz = np.zeros(64, dtype=np.int64)
    t = reader.peek16()
    size = int(dc_lut[0][t])
    if size < 0:
        raise DecodeError("bad DC huffman code", reader.offset)
    reader.skip(int(dc_lut[1][t]))
    diff = _extend(reader.read(size), size) if size else 0
    dc = pred + diff
    zz[0] = dc
    k = 1
    while k < 64:
        t = reader.peek16()
        sym = int(ac_lut[0][t])
        if sym < 0:
            raise DecodeError("bad AC huffman code", reader.offset)
        reader.skip(int(ac_lut[1][t]))
        if sym == 0x00:  # EOB
            break
        run = sym >> 4
        size = sym & 0x0F
        if size == 0:
            if run != 15:
                raise DecodeError(f"invalid AC symbol {sym:#x}", reader.offset)
            k += 16
            continue
        k += run
        if k > 63:
            raise DecodeError("AC run past end of block", reader.offset)
        zz[k] = _extend(reader.read(size), size)
        k += 1
    return zz, dc


@dataclass
class _Component:
    ident: int
    hsamp: int
    vsamp: int
    qtbl: int
    dc_tbl: int = 0
    ac_tbl: int = 0


def _parse_segments(data: bytes):
    """Yield (marker, payload_start, payload_end) for each segment before SOS."""
    if len(data) < 2 or data[0:2] != b"\xff\xd8":
        raise DecodeError("missing SOI marker", 0)
    pos = 2
    while True:
        if pos + 4 > len(data):
            raise DecodeError("unexpected end of header", pos)
        if data[pos] != 0xFF:
            raise DecodeError(f"expected marker, got {data[pos]:#04x}", pos)
        marker = data[pos + 1]
        if marker == 0xD9:
            raise DecodeError("no scan before EOI", pos)
        length = struct.unpack(">H", data[pos + 2 : pos + 4])[0]
        start = pos + 4
        end = pos + 2 + length
        if end > len(data):
            raise DecodeError("segment overruns stream", pos)
        yield marker, start, end
        if marker == 0xDA:
            return
        pos = end


def _find_scan_end(data: bytes, start: int) -> int:
    pos = start
    while True:
        idx = data.find(0xFF, pos)
        if idx < 0 or idx + 1 >= len(data):
            raise DecodeError("scan not terminated by a marker", len(data))
        nxt = data[idx + 1]
        if nxt == 0x00:
            pos = idx + 2
            continue
        if 0xD0 <= nxt <= 0xD7:
            raise DecodeError("restart markers unsupported", idx)
        return idx


def decode(source: Bitstream | bytes) -> ImagePlane:
    """Decode a baseline JPEG stream back to an 8-bit image.

    Only the file-level quantization tables drive reconstruction; the qf map
    extension, when present, is informational.
    """
    data = source.data if isinstance(source, Bitstream) else source
    if len(data) == 0:
        raise DecodeError("empty stream", 0)

    qtables: dict[int, np.ndarray] = {}
    huff: dict[tuple[int, int], tuple] = {}
    components: list[_Component] = []
    width = height = 0
    scan_start = None

    for marker, start, end in _parse_segments(data):
        payload = data[start:end]
        if marker == 0xDB:
            pos = 0
            while pos < len(payload):
                pq = payload[pos] >> 4
                ident = payload[pos] & 0x0F
                if pq != 0:
                    raise DecodeError("16-bit quant tables unsupported", start + pos)
                if pos + 65 > len(payload):
                    raise DecodeError("short DQT payload", start + pos)
                zz = np.frombuffer(payload[pos + 1 : pos + 65], dtype=np.uint8)
                raster = np.zeros(64, dtype=np.int64)
                raster[ZIGZAG] = zz
                qtables[ident] = raster.reshape(8, 8)
                pos += 65
        elif marker == 0xC4:
            pos = 0
            while pos < len(payload):
                cls = payload[pos] >> 4
                ident = payload[pos] & 0x0F
                bits = list(payload[pos + 1 : pos + 17])
                n = sum(bits)
                values = list(payload[pos + 17 : pos + 17 + n])
                if len(values) != n:
                    raise DecodeError("short DHT payload", start + pos)
                huff[(cls, ident)] = _build_decode_lut(bits, values)
                pos += 17 + n
        elif marker == 0xC0:
            precision, height, width, ncomp = struct.unpack(">BHHB", payload[:6])
            if precision != 8:
                raise DecodeError(f"unsupported precision {precision}", start)
            for i in range(ncomp):
                cid, samp, qt = payload[6 + 3 * i : 9 + 3 * i]
                comp = _Component(cid, samp >> 4, samp & 0x0F, qt)
                if comp.hsamp not in (1, 2) or comp.vsamp not in (1, 2):
                    raise DecodeError(f"unsupported sampling {samp:#x}", start)
                components.append(comp)
            if len(components) not in (1, 3):
                raise DecodeError(f"unsupported component count {ncomp}", start)
        elif marker in (0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7, 0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF):
            raise DecodeError("not a baseline (SOF0) stream", start)
        elif marker == 0xDD:
            raise DecodeError("restart intervals unsupported", start)
        elif marker == 0xDA:
            ns = payload[0]
            if ns != len(components):
                raise DecodeError("partial scans unsupported", start)
            by_id = {c.ident: c for c in components}
            for i in range(ns):
                cid = payload[1 + 2 * i]
                tbl = payload[2 + 2 * i]
                if cid not in by_id:
                    raise DecodeError(f"scan names unknown component {cid}", start)
                by_id[cid].dc_tbl = tbl >> 4
                by_id[cid].ac_tbl = tbl & 0x0F
            scan_start = end

    if not components or scan_start is None:
        raise DecodeError("no frame header", len(data))
    if width < 8 or height < 8:
        raise DecodeError(f"frame too small: {width}x{height}", 0)

    scan_end = _find_scan_end(data, scan_start)
    scan = data[scan_start:scan_end].replace(b"\xff\x00", b"\xff")
    reader = _BitReader(scan, scan_start)

    hmax = max(c.hsamp for c in components)
    vmax = max(c.vsamp for c in components)
    mcu_w = 8 * hmax
    mcu_h = 8 * vmax
    mcus_x = -(-width // mcu_w)
    mcus_y = -(-height // mcu_h)

    store = []
    for c in components:
        if c.qtbl not in qtables:
            raise DecodeError(f"missing quant table {c.qtbl}", scan_start)
        if (0, c.dc_tbl) not in huff or (1, c.ac_tbl) not in huff:
            raise DecodeError(f"missing huffman tables for component {c.ident}", scan_start)
        store.append(np.zeros((mcus_y * c.vsamp, mcus_x * c.hsamp, 64), dtype=np.int64))

    preds = [0] * len(components)
    for my in range(mcus_y):
        for mx in range(mcus_x):
            for ci, c in enumerate(components):
                for v in range(c.vsamp):
                    for hidx in range(c.hsamp):
                        zz, preds[ci] = _decode_block(
                            reader, huff[(0, c.dc_tbl)], huff[(1, c.ac_tbl)], preds[ci]
                        )
                        store[ci][my * c.vsamp + v, mx * c.hsamp + hidx] = zz

    planes = []
    for ci, c in enumerate(components):
        zz = store[ci].reshape(-1, 64) * qtables[c.qtbl].reshape(64)[ZIGZAG]
        raster = np.zeros_like(zz)
        raster[:, ZIGZAG] = zz
        blocks = raster.reshape(store[ci].shape[0], store[ci].shape[1], 8, 8).astype(np.float64)
        pixels = _deblockify(_DCT.T @ blocks @ _DCT) + 128.0
        # Bring the component up to full resolution by sample replication.
        pixels = np.repeat(np.repeat(pixels, vmax // c.vsamp, axis=0), hmax // c.hsamp, axis=1)
        planes.append(pixels[:height, :width])

    if len(components) == 1:
        gray = np.clip(np.round(planes[0]), 0, 255).astype(np.uint8)
        return ImagePlane(gray[:, :, None])
    rgb = _ycbcr_to_rgb(planes[0], planes[1], planes[2])
    return ImagePlane(rgb)


def read_qfmap(source: Bitstream | bytes) -> QfMap | None:
    """Extract the qf map extension segment, if the stream carries one."""
    data = source.data if isinstance(source, Bitstream) else source
    for marker, start, end in _parse_segments(data):
        if marker != _QFMAP_MARKER:
            if marker == 0xDA:
                break
            continue
        payload = data[start:end]
        if payload[: len(QFMAP_MAGIC)] != QFMAP_MAGIC:
            continue
        version = payload[len(QFMAP_MAGIC)]
        if version != QFMAP_VERSION:
            raise DecodeError(f"unsupported qf map version {version}", start)
        bw, bh = struct.unpack(">HH", payload[5:9])
        flat = np.frombuffer(payload[9 : 9 + bw * bh], dtype=np.uint8)
        if flat.size != bw * bh:
            raise DecodeError("qf map payload truncated", start)
        return QfMap(qf=flat.reshape(bh, bw).astype(np.int64))
    return None


def measure_rate(stream: Bitstream | bytes, width: int | None = None, height: int | None = None) -> float:
    """Coding rate in bits per pixel of the original image."""
    if isinstance(stream, Bitstream):
        width = width or stream.width
        height = height or stream.height
        nbytes = len(stream.data)
    else:
        nbytes = len(stream)
    if not width or not height:
        raise ValueError("raw byte input needs explicit image dimensions")
    return 8.0 * nbytes / (width * height)
