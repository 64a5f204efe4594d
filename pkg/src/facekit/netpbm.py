"""Binary Netpbm readers/writers: PGM (P5) for grayscale, PPM (P6) for color.

Only maxval 255 is supported. The header is magic, width, height, maxval
separated by whitespace (with optional '#' comments), followed by a single
whitespace byte and then the raw pixel bytes; anything else is rejected.
"""

from __future__ import annotations

import numpy as np

from .images import GrayImage, RgbImage


class NetpbmError(ValueError):
    """Malformed or unsupported Netpbm file."""


_WHITESPACE = b" \t\r\n\v\f"


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments (comment runs to end of line)
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c in (b"#",):
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise NetpbmError("unexpected end of header")
    return data[start:pos], pos


def _parse_header(data: bytes) -> tuple[bytes, int, int, int]:
    magic, pos = _read_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise NetpbmError(f"unsupported magic {magic!r} (want P5 or P6)")
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _read_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise NetpbmError(f"bad {name} field {tok!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise NetpbmError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise NetpbmError(f"unsupported maxval {maxval} (want 255)")
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise NetpbmError("expected single whitespace after maxval")
    return magic, width, height, pos + 1


def read_image(path) -> GrayImage | RgbImage:
    """Read a PGM or PPM file, dispatching on the magic number."""
    with open(path, "rb") as f:
        data = f.read()
    magic, width, height, pos = _parse_header(data)
    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    raster = data[pos:]
    if len(raster) < expected:
        raise NetpbmError(f"truncated raster: got {len(raster)} bytes, want {expected}")
    if len(raster) > expected:
        raise NetpbmError(f"trailing data after raster ({len(raster) - expected} bytes)")
    pixels = np.frombuffer(raster, dtype=np.uint8)
    if magic == b"P6":
        return RgbImage(pixels.reshape(height, width, 3))
    return GrayImage(pixels.reshape(height, width))


def read_pgm(path) -> GrayImage:
    img = read_image(path)
    if not isinstance(img, GrayImage):
        raise NetpbmError(f"{path}: expected PGM, found PPM")
    return img


def read_ppm(path) -> RgbImage:
    img = read_image(path)
    if not isinstance(img, RgbImage):
        raise NetpbmError(f"{path}: expected PPM, found PGM")
    return img


def write_pgm(img: GrayImage, path) -> None:
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (img.width, img.height))
        f.write(img.pixels.tobytes())


def write_ppm(img: RgbImage, path) -> None:
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (img.width, img.height))
        f.write(img.pixels.tobytes())
