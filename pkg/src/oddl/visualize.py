"""Tile dictionary atoms into a grayscale grid and write it as binary PGM."""

import math

import numpy as np

from .errors import FormatError, InvalidInputError


def atom_grid(D, height, width, cols):
    """uint8 image of the atoms of ``D`` laid out row-major, ``cols`` per row.

    Each atom is min-max scaled to [0, 255] independently (a constant atom
    renders as 128).  Tiles are separated, and framed, by 1-pixel lines of 0.
    """
    D = np.asarray(D, dtype=np.float64)
    n, k = D.shape
    if n != height * width:
        raise InvalidInputError(f"atoms have {n} entries, cannot reshape to {height}x{width}")
    if cols < 1:
        raise InvalidInputError(f"grid needs at least one column, got {cols}")
    rows = math.ceil(k / cols)
    canvas = np.zeros((rows * height + rows + 1, cols * width + cols + 1), dtype=np.uint8)
    for j in range(k):
        atom = D[:, j].reshape(height, width)
        lo, hi = atom.min(), atom.max()
        if hi - lo > 0:
            tile = np.rint((atom - lo) / (hi - lo) * 255.0).astype(np.uint8)
        else:
            tile = np.full((height, width), 128, dtype=np.uint8)
        r, c = divmod(j, cols)
        top, left = 1 + r * (height + 1), 1 + c * (width + 1)
        canvas[top : top + height, left : left + width] = tile
    return canvas


def pgm_bytes(image):
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + image.tobytes()


def write_pgm(image, path):
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(image))


def read_pgm(path):
    """Read a binary (P5) PGM with maxval 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header", pos)
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P5" or int(tokens[3]) != 255:
        raise FormatError("only binary PGM with maxval 255 is supported", 0)
    w, h = int(tokens[1]), int(tokens[2])
    if len(data) - pos != w * h:
        raise FormatError(f"expected {w * h} pixel bytes, found {len(data) - pos}", pos)
    return np.frombuffer(data, dtype=np.uint8, offset=pos).reshape(h, w).copy()
