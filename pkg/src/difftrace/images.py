"""Image container and deterministic file IO.

Pixels stay as raw (unclamped) floats in memory so losses see the values the
renderer produced; clamping and 8-bit quantization happen only when writing
display formats.  PPM (binary P6) is the primary format; PNG is an optional
convenience via Pillow; .npy dumps carry full float precision for
quantization-free optimization targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Image:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) float, row-major, unclamped

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel buffer {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3")

    def to_uint8(self) -> np.ndarray:
        return np.round(np.clip(self.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_channels(r, g, b, width: int, height: int) -> Image:
    px = np.stack([np.asarray(r), np.asarray(g), np.asarray(b)], axis=-1)
    return Image(width, height, px.reshape(height, width, 3))


def write_ppm(image: Image, path) -> None:
    """Binary P6, maxval 255; byte-deterministic for fixed pixels."""
    data = image.to_uint8()
    with open(path, "wb") as fh:
        fh.write(f"P6\n{image.width} {image.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_ppm(path) -> Image:
    with open(path, "rb") as fh:
        blob = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                pos += 1
            continue
        startpos = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        fields.append(blob[startpos:pos])
    if fields[0] != b"P6":
        raise ValueError(f"not a binary PPM file: {path}")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1  # single whitespace after maxval
    raw = np.frombuffer(blob, dtype=np.uint8, count=width * height * 3,
                        offset=pos)
    pixels = raw.reshape(height, width, 3).astype(np.float64) / float(maxval)
    return Image(width, height, pixels)


def write_png(image: Image, path) -> None:
    try:
        from PIL import Image as PilImage
    except ImportError:
        raise RuntimeError("PNG output requires Pillow (pip install Pillow)")
    PilImage.fromarray(image.to_uint8(), mode="RGB").save(path, format="PNG")


def write_raw(image: Image, path) -> None:
    """float32 .npy dump; lossless enough for optimization targets."""
    np.save(path, image.pixels.astype(np.float32))


def read_raw(path) -> Image:
    data = np.load(path)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ValueError(f"raw image dump must be (h, w, 3), got {data.shape}")
    return Image(int(data.shape[1]), int(data.shape[0]), data)


def read_target(path) -> Image:
    p = str(path)
    if p.endswith(".npy"):
        return read_raw(p)
    if p.endswith(".ppm"):
        return read_ppm(p)
    raise ValueError(f"unsupported target image format: {path}")
