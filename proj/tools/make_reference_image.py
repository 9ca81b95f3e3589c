#!/usr/bin/env python3
"""Regenerates data/astronaut_256x254.pgm.

Source: the `astronaut` sample shipped with scikit-image (NASA photograph of
Eileen Collins, public domain). Converted to gray, area-resampled to
256x254 and quantized to 8 bits.
"""
import pathlib

import numpy as np
from skimage import color, data, transform

out = pathlib.Path(__file__).resolve().parent.parent / "data" / "astronaut_256x254.pgm"
img = color.rgb2gray(data.astronaut())
img = transform.resize(img, (254, 256), anti_aliasing=True)
raw = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
with open(out, "wb") as f:
    f.write(b"P5\n256 254\n255\n")
    f.write(raw.tobytes())
print(out)
