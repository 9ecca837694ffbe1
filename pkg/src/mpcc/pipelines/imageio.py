"""Binary PGM (P5) input/output and a tiny line-plot rasterizer."""

import re
from pathlib import Path

import numpy as np

from ..errors import BadImage

_HEADER = re.compile(rb"\AP5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+"
                     rb"(?:#[^\n]*\n\s*)*(\d+)\s")


def read_pgm(path):
    """Read an 8- or 16-bit binary PGM as a float64 array."""
    data = Path(path).read_bytes()
    match = _HEADER.match(data)
    if not match:
        raise BadImage(f"{path}: not a binary (P5) PGM file")
    width, height, maxval = (int(g) for g in match.groups())
    if not 0 < maxval < 65536:
        raise BadImage(f"{path}: bad maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    start = match.end()
    count = width * height
    if len(data) - start < count * dtype.itemsize:
        raise BadImage(f"{path}: truncated pixel data")
    pixels = np.frombuffer(data, dtype=dtype, count=count, offset=start)
    return pixels.reshape(height, width).astype(np.float64)


def to_uint8(image):
    return np.clip(np.rint(np.asarray(image, dtype=np.float64)), 0, 255).astype(np.uint8)


def write_pgm(path, image):
    """Write an image as 8-bit P5; values are rounded and clipped to 0..255."""
    pixels = to_uint8(image)
    if pixels.ndim != 2:
        raise BadImage("PGM images must be 2-D")
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(pixels.tobytes())


def stretch(image):
    """Map an array linearly onto 0..255 for display."""
    image = np.asarray(image, dtype=np.float64)
    lo, hi = image.min(), image.max()
    if hi == lo:
        return np.zeros_like(image)
    return (image - lo) * (255.0 / (hi - lo))


def plot_traces(traces, height=240, width=640):
    """Rasterize equal-length series as dark polylines on a white canvas.

    Each series gets its own horizontal band, scaled to its own range;
    returns a uint8 image ready for :func:`write_pgm`.
    """
    traces = [np.asarray(t, dtype=np.float64) for t in traces]
    canvas = np.full((height, width), 255, dtype=np.uint8)
    band = height // max(1, len(traces))
    for b, series in enumerate(traces):
        top = b * band
        canvas[top, :] = 200
        if series.size < 2:
            continue
        lo, hi = series.min(), series.max()
        span = hi - lo if hi > lo else 1.0
        xs = np.linspace(0, width - 1, series.size)
        ys = top + (band - 3) - (series - lo) / span * (band - 6)
        for i in range(series.size - 1):
            steps = int(max(abs(xs[i + 1] - xs[i]), abs(ys[i + 1] - ys[i]))) + 1
            px = np.rint(np.linspace(xs[i], xs[i + 1], steps)).astype(int)
            py = np.rint(np.linspace(ys[i], ys[i + 1], steps)).astype(int)
            canvas[np.clip(py, 0, height - 1), np.clip(px, 0, width - 1)] = 0
    return canvas
