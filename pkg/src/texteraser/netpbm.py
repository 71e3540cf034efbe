"""Binary PPM/PGM codecs and image/tensor conversion.

RGB images are uint8 arrays (height, width, 3); masks are bool arrays
(height, width). Round trips are bit-exact; malformed input is rejected
with the byte offset where parsing failed rather than guessed around.
"""

import numpy as np

from .tensor import DTYPE, ShapeMismatchError


class CodecError(ValueError):
    """Malformed netpbm data; carries the byte offset of the failure."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


def _parse_header(data: bytes, magic: bytes, path):
    """Parse 'P5'/'P6' + three decimal fields, honoring '#' comments.

    Returns (width, height, payload_offset).
    """
    if data[:2] != magic:
        raise CodecError(
            f"{path}: expected magic {magic.decode()!r}, "
            f"got {data[:2]!r}", offset=0)
    pos = 2
    fields = []
    while len(fields) < 3:
        # skip whitespace and comments
        while pos < len(data):
            c = data[pos:pos + 1]
            if c == b"#":
                nl = data.find(b"\n", pos)
                if nl < 0:
                    raise CodecError(f"{path}: unterminated comment", offset=pos)
                pos = nl + 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise CodecError(f"{path}: expected integer header field", offset=pos)
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise CodecError(f"{path}: expected whitespace after maxval", offset=pos)
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise CodecError(f"{path}: dimensions must be >= 1, got {width}x{height}")
    if maxval != 255:
        raise CodecError(f"{path}: maxval must be 255, got {maxval}")
    return width, height, pos


def read_image(path) -> np.ndarray:
    """Read a binary PPM (P6, maxval 255) into a (H, W, 3) uint8 array."""
    with open(path, "rb") as f:
        data = f.read()
    width, height, pos = _parse_header(data, b"P6", path)
    need = width * height * 3
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise CodecError(
            f"{path}: short pixel data, expected {need} bytes, "
            f"got {len(payload)}", offset=pos + len(payload))
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()


def write_image(image: np.ndarray, path) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ShapeMismatchError(
            f"expected (H, W, 3) uint8 image, got {image.shape} {image.dtype}")
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (image.shape[1], image.shape[0]))
        f.write(np.ascontiguousarray(image).tobytes())


def read_mask(path) -> np.ndarray:
    """Read a binary PGM (P5); values > 127 are True."""
    with open(path, "rb") as f:
        data = f.read()
    width, height, pos = _parse_header(data, b"P5", path)
    need = width * height
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise CodecError(
            f"{path}: short pixel data, expected {need} bytes, "
            f"got {len(payload)}", offset=pos + len(payload))
    values = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return values > 127


def write_mask(mask: np.ndarray, path) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.dtype != np.bool_:
        raise ShapeMismatchError(
            f"expected (H, W) bool mask, got {mask.shape} {mask.dtype}")
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (mask.shape[1], mask.shape[0]))
        f.write(np.where(mask, 255, 0).astype(np.uint8).tobytes())


def image_to_tensor(image: np.ndarray) -> np.ndarray:
    """(H, W, 3) uint8 -> (3, H, W) float64 in [0, 1]."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatchError(f"expected (H, W, 3) image, got {image.shape}")
    return np.ascontiguousarray(image.transpose(2, 0, 1), dtype=DTYPE) / 255.0


def quantize(values: np.ndarray) -> np.ndarray:
    """Scale [0, 1] reals by 255, round half away from zero, clamp to 0..255."""
    v = np.asarray(values, dtype=DTYPE) * 255.0
    rounded = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


def tensor_to_image(t: np.ndarray) -> np.ndarray:
    """(3, H, W) float64 in [0, 1] -> (H, W, 3) uint8."""
    t = np.asarray(t)
    if t.ndim != 3 or t.shape[0] != 3:
        raise ShapeMismatchError(f"expected (3, H, W) tensor, got {t.shape}")
    return np.ascontiguousarray(quantize(t).transpose(1, 2, 0))
