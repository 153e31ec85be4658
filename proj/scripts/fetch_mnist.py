#!/usr/bin/env python3
"""Build the bundled MNIST IDX files from the `mnist` npm package.

The npm package (https://www.npmjs.com/package/mnist) ships a binarized,
desk-scale subset of MNIST (10 000 images, 863-1127 per digit) as per-digit
JSON arrays. This script converts it into standard IDX files (magic
0x803 / 0x801): the last 160 images of each digit form the test split, the
rest (703-967 per digit) the training split. Both files interleave digits
round-robin so neither is label-sorted.

Usage:
  npm install mnist
  python3 scripts/fetch_mnist.py --src node_modules/mnist/src/digits --out data/mnist
"""

import argparse
import json
import pathlib
import struct

TEST_PER_DIGIT = 160
SIDE = 28
PIXELS = SIDE * SIDE


def write_idx_images(path: pathlib.Path, images: list[bytes]) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), SIDE, SIDE))
        for img in images:
            f.write(img)


def write_idx_labels(path: pathlib.Path, labels: list[int]) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def interleave(per_digit: list[list[bytes]]) -> tuple[list[bytes], list[int]]:
    imgs: list[bytes] = []
    labels: list[int] = []
    for i in range(max(len(d) for d in per_digit)):
        for digit in range(10):
            if i < len(per_digit[digit]):
                imgs.append(per_digit[digit][i])
                labels.append(digit)
    return imgs, labels


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--src", default="node_modules/mnist/src/digits",
                    help="directory with the npm package's 0.json .. 9.json")
    ap.add_argument("--out", default="data/mnist", help="output directory for IDX files")
    args = ap.parse_args()

    src = pathlib.Path(args.src)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    train_per_digit: list[list[bytes]] = []
    test_per_digit: list[list[bytes]] = []
    for digit in range(10):
        with open(src / f"{digit}.json") as f:
            flat = json.load(f)["data"]
        n = len(flat) // PIXELS
        if n <= TEST_PER_DIGIT:
            raise SystemExit(f"digit {digit}: only {n} images, need > {TEST_PER_DIGIT}")
        images = [bytes(255 if v else 0 for v in flat[i * PIXELS:(i + 1) * PIXELS])
                  for i in range(n)]
        train_per_digit.append(images[:n - TEST_PER_DIGIT])
        test_per_digit.append(images[n - TEST_PER_DIGIT:])

    train_imgs, train_labels = interleave(train_per_digit)
    test_imgs, test_labels = interleave(test_per_digit)

    write_idx_images(out / "train-images-idx3-ubyte", train_imgs)
    write_idx_labels(out / "train-labels-idx1-ubyte", train_labels)
    write_idx_images(out / "t10k-images-idx3-ubyte", test_imgs)
    write_idx_labels(out / "t10k-labels-idx1-ubyte", test_labels)
    print(f"wrote {len(train_imgs)} train / {len(test_imgs)} test images to {out}")


if __name__ == "__main__":
    main()
