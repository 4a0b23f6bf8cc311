"""Minimal 16-bit binary PGM (P5) reader/writer.

Used for depth images (values in millimeters) and albedo maps (values
scaled to the 16-bit range). Sample values are big-endian per the Netpbm
convention.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError


def read_pgm16(path: str | Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    # header: magic, width, height, maxval separated by whitespace/comments
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif data[i : i + 1].isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise FormatError("not a binary PGM (P5) file", str(path))
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise FormatError("malformed PGM header", str(path))
    if maxval != 65535:
        raise FormatError(f"expected 16-bit PGM (maxval 65535), got {maxval}", str(path))
    i += 1  # single whitespace after maxval
    body = data[i : i + width * height * 2]
    if len(body) != width * height * 2:
        raise FormatError("PGM pixel data truncated", str(path))
    return np.frombuffer(body, dtype=">u2").reshape(height, width).astype(np.uint16)


def write_pgm16(path: str | Path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    if img.dtype != np.uint16:
        if np.any(img < 0) or np.any(img > 65535):
            raise ValueError("values out of uint16 range")
        img = img.astype(np.uint16)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + img.astype(">u2").tobytes())
