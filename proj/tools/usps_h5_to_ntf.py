#!/usr/bin/env python3
"""Convert the common usps.h5 layout (train/test groups with data and target) to NTF files."""
import json
import struct
import sys
from pathlib import Path

import h5py
import numpy as np


def write_ntf(path, array, meta):
    header = json.dumps({"dtype": "f64", "shape": list(array.shape), "meta": meta}).encode()
    with open(path, "wb") as f:
        f.write(b"NTF1")
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def main():
    if len(sys.argv) != 3:
        sys.exit("usage: usps_h5_to_ntf.py usps.h5 OUT_DIR")
    out = Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    with h5py.File(sys.argv[1], "r") as h5:
        for split in ("train", "test"):
            images = np.asarray(h5[split]["data"], dtype=np.float64).reshape(-1, 16, 16)
            labels = np.asarray(h5[split]["target"], dtype=np.float64)
            write_ntf(out / f"{split}_images.ntf", np.clip(images, 0.0, 1.0), {"source": "usps"})
            write_ntf(out / f"{split}_labels.ntf", labels, {"source": "usps"})


if __name__ == "__main__":
    main()
