"""Image and mask file handling: PPM/PGM, PNG, and run-length mask strings."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .core import ImagePlane, Mask


def _read_pnm(data: bytes) -> np.ndarray:
    # Header tokens may be separated by any whitespace and '#' comments.
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated pnm header")
        tokens.append(data[start:pos])
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported pnm magic: {magic!r}")
    if maxval != 255:
        raise ValueError(f"only 8-bit pnm supported, maxval={maxval}")
    pos += 1  # single whitespace after maxval
    channels = 3 if magic == b"P6" else 1
    need = w * h * channels
    raster = data[pos : pos + need]
    if len(raster) != need:
        raise ValueError(f"pnm raster truncated: {len(raster)} of {need} bytes")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, channels)


def _write_pnm(pixels: np.ndarray) -> bytes:
    h, w, c = pixels.shape
    magic = b"P6" if c == 3 else b"P5"
    return magic + f"\n{w} {h}\n255\n".encode() + pixels.tobytes()


def read_image(path: str | Path) -> ImagePlane:
    """Load a PNG or PPM/PGM file as an 8-bit image."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm", ".pnm"):
        return ImagePlane(_read_pnm(path.read_bytes()))
    img = Image.open(path)
    if img.mode == "L":
        arr = np.asarray(img, dtype=np.uint8)[:, :, None]
    else:
        arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return ImagePlane(np.ascontiguousarray(arr))


def write_image(path: str | Path, image: ImagePlane) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm", ".pnm"):
        path.write_bytes(_write_pnm(image.pixels))
        return
    arr = image.pixels[:, :, 0] if image.channels == 1 else image.pixels
    Image.fromarray(arr).save(path, format="PNG")


def read_mask(path: str | Path) -> Mask:
    """Load a 0/255 PNG as a binary mask."""
    arr = np.asarray(Image.open(path).convert("L"), dtype=np.uint8)
    return Mask(bits=arr >= 128)


def write_mask(path: str | Path, mask: Mask) -> None:
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")


def rle_encode(mask: Mask) -> dict:
    """Mask to uncompressed column-major run lengths, starting with zeros."""
    h, w = mask.bits.shape
    flat = mask.bits.flatten(order="F")
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return {"size": [int(h), int(w)], "counts": counts}


def rle_decode(rle: dict) -> Mask:
    h, w = rle["size"]
    counts = rle["counts"]
    if sum(counts) != h * w:
        raise ValueError(f"rle counts sum to {sum(counts)}, grid is {h}x{w}")
    values = np.zeros(len(counts), dtype=np.bool_)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return Mask(bits=flat.reshape((h, w), order="F"))
