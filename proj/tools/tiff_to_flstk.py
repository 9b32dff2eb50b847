#!/usr/bin/env python3
"""Convert a multi-page TIFF acquisition into an FLSTK1 stack (f32, little endian)."""

import argparse
import sys

import numpy as np
from PIL import Image, ImageSequence


def read_frames(path):
    with Image.open(path) as tif:
        frames = [np.asarray(page, dtype=np.float64) for page in ImageSequence.Iterator(tif)]
    if not frames:
        raise ValueError(f"{path}: no frames")
    shape = frames[0].shape
    if len(shape) != 2:
        raise ValueError(f"{path}: expected single-channel pages, got shape {shape}")
    for i, f in enumerate(frames):
        if f.shape != shape:
            raise ValueError(f"{path}: page {i} has shape {f.shape}, expected {shape}")
    return np.stack(frames)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("tiff")
    parser.add_argument("output")
    parser.add_argument("--offset", type=float, default=0.0, help="camera offset subtracted from every sample")
    parser.add_argument("--gain", type=float, default=1.0, help="photons per count after the offset")
    args = parser.parse_args(argv)

    try:
        stack = (read_frames(args.tiff) - args.offset) * args.gain
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    if not np.all(np.isfinite(stack)):
        print("error: non-finite samples", file=sys.stderr)
        return 3

    t, h, w = stack.shape
    with open(args.output, "wb") as out:
        out.write(f"FLSTK1\nT={t} H={h} W={w} dtype=f32 endian=LE\n".encode("ascii"))
        out.write(stack.astype("<f4").tobytes(order="C"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
