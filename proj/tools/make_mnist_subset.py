#!/usr/bin/env python3
# Copyright 2026 The FedHe Simulator Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts the 10,000 MNIST digits shipped in the `mnist` npm package
(https://github.com/cazala/mnist, MIT) into gzipped IDX files.

The package stores pixels as byte/255 rounded to three decimals, which is
still injective over 0..255, so round(v * 255) restores the original bytes.

Usage: make_mnist_subset.py <package>/src/digits <out_dir>
"""
import gzip
import json
import os
import struct
import sys


def write_gz(path, payload):
    with open(path, "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz:
            gz.write(payload)


def main():
    digits_dir, out_dir = sys.argv[1], sys.argv[2]
    images = bytearray()
    labels = bytearray()
    for label in range(10):
        with open(os.path.join(digits_dir, f"{label}.json")) as f:
            pixels = json.load(f)["data"]
        assert len(pixels) % 784 == 0
        images.extend(round(v * 255) for v in pixels)
        labels.extend([label] * (len(pixels) // 784))
    n = len(labels)
    write_gz(os.path.join(out_dir, "mnist10k-images-idx3-ubyte.gz"),
             struct.pack(">IIII", 0x803, n, 28, 28) + bytes(images))
    write_gz(os.path.join(out_dir, "mnist10k-labels-idx1-ubyte.gz"),
             struct.pack(">II", 0x801, n) + bytes(labels))
    print(f"wrote {n} samples to {out_dir}")


if __name__ == "__main__":
    main()
