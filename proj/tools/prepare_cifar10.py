#!/usr/bin/env python3
# Copyright (c) 2026 The LADD Workbench Authors
# SPDX-License-Identifier: Apache-2.0
"""Materialize CIFAR-10 in the canonical binary-batch layout.

The npm package `tfjs-cifar10` redistributes the five training batches and
the test batch as 1024x10000 RGB PNGs (one image per row, pixel-interleaved)
plus JSON label arrays. This script rewrites them as
data_batch_{1..5}.bin / test_batch.bin: 3073-byte records of one label byte
followed by 1024 R, 1024 G, 1024 B bytes.
"""
import argparse
import io
import json
import pathlib
import tarfile
import urllib.request

import numpy as np
from PIL import Image

TARBALL_URL = "https://registry.npmjs.org/tfjs-cifar10/-/tfjs-cifar10-1.1.1.tgz"


def read_member(tar, name):
    return tar.extractfile(f"package/{name}").read()


def to_records(png_bytes, labels):
    rgb = np.asarray(Image.open(io.BytesIO(png_bytes)).convert("RGB"), dtype=np.uint8)
    assert rgb.shape == (len(labels), 1024, 3), rgb.shape
    planes = rgb.transpose(0, 2, 1).reshape(len(labels), 3072)
    out = np.empty((len(labels), 3073), dtype=np.uint8)
    out[:, 0] = np.asarray(labels, dtype=np.uint8)
    out[:, 1:] = planes
    return out.tobytes()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--tarball", help="local copy of the npm tarball")
    args = ap.parse_args()

    if args.tarball:
        blob = pathlib.Path(args.tarball).read_bytes()
    else:
        with urllib.request.urlopen(TARBALL_URL) as resp:
            blob = resp.read()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        train_labels = json.loads(read_member(tar, "train_lables.json"))
        test_labels = json.loads(read_member(tar, "test_lables.json"))
        for k in range(5):
            chunk = train_labels[k * 10000:(k + 1) * 10000]
            data = to_records(read_member(tar, f"data_batch_{k + 1}.png"), chunk)
            (out / f"data_batch_{k + 1}.bin").write_bytes(data)
        data = to_records(read_member(tar, "test_batch.png"), test_labels)
        (out / "test_batch.bin").write_bytes(data)
    print(f"wrote CIFAR-10 binary batches to {out}")


if __name__ == "__main__":
    main()
