#!/usr/bin/env python3
# Run-length masks: encoding, decoding, and IOU computed straight on runs.

import numpy as np

from masktubes import encode, decode, mask_iou

# A binary mask is stored as alternating background/foreground run counts in
# row-major order, starting with a (possibly zero) background count.
grid = np.array(
    [
        [0, 0, 1, 1, 0],
        [0, 1, 1, 1, 0],
        [0, 0, 1, 0, 0],
    ],
    dtype=bool,
)
mask = encode(grid)
print("grid:")
print(grid.astype(int))
print("runs:", mask.runs)  # sums to 15 pixels, 6 of them foreground
print("area:", mask.area)
print("bbox:", mask.bbox())

# decode is the exact inverse: the codec is canonical, one encoding per grid
assert (decode(mask) == grid).all()
print("roundtrip ok")

# IOU walks the two run lists without decompressing anything
shifted = encode(np.roll(grid, 1, axis=1))
print("IOU with a 1px shifted copy:", mask_iou(mask, shifted))
print("IOU with itself:", mask_iou(mask, mask))

# empty masks never gate anything: IOU of two empties is defined as 0
empty = encode(np.zeros_like(grid))
print("IOU of two empty masks:", mask_iou(empty, empty))
