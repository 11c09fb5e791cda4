#!/usr/bin/env python3
"""Regenerates the 128x128 natural-image crops used by the RD checks.

Sources are the scikit-image sample images (astronaut: NASA, public domain;
chelsea and coffee: CC0). Crops are chosen over textured regions so that
upsampling quality actually matters.
"""
import numpy as np
from skimage import data


def save_ppm(path, rgb):
    h, w, _ = rgb.shape
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def crop(img, y, x, size=128):
    return img[y : y + size, x : x + size, :]


def main():
    save_ppm("crop_astronaut.ppm", crop(data.astronaut(), 60, 150))   # face + helmet edge
    save_ppm("crop_chelsea.ppm", crop(data.chelsea(), 80, 120))       # fur texture
    save_ppm("crop_coffee.ppm", crop(data.coffee(), 120, 220))        # cup rim + beans
    print("wrote crop_astronaut.ppm crop_chelsea.ppm crop_coffee.ppm")


if __name__ == "__main__":
    main()
