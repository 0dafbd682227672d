#!/usr/bin/env python3
"""Write a small MNIST subset in IDX format.

The images come from the 5000-sample MNIST extract bundled in the mlxtend
wheel (mlxtend/data/data/mnist_5k.csv.gz, 784 pixel columns then the label).
Without --wheel the wheel is fetched with `pip download`.
"""

import argparse
import gzip
import struct
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
PINNED = "mlxtend==0.24.0"


def fetch_wheel(dest: Path) -> Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", PINNED, "--no-deps", "-q", "-d", str(dest)],
        check=True,
    )
    wheels = sorted(dest.glob("mlxtend-*.whl"))
    if not wheels:
        sys.exit("pip download produced no mlxtend wheel")
    return wheels[0]


def read_rows(wheel: Path):
    with zipfile.ZipFile(wheel) as z:
        text = gzip.decompress(z.read(MEMBER)).decode()
    for line in text.splitlines():
        values = [int(float(v)) for v in line.split(",")]
        if len(values) != 785:
            sys.exit(f"unexpected row width {len(values)} in {MEMBER}")
        yield values[:784], values[784]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="data", type=Path)
    ap.add_argument("--count", default=1000, type=int)
    ap.add_argument("--wheel", type=Path, help="local mlxtend wheel (skips pip download)")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or fetch_wheel(Path(tmp))
        rows = list(read_rows(wheel))
    if args.count > len(rows):
        sys.exit(f"only {len(rows)} images available")
    rows = rows[: args.count]

    args.out_dir.mkdir(parents=True, exist_ok=True)
    images = args.out_dir / "mnist-subset-images-idx3-ubyte"
    labels = args.out_dir / "mnist-subset-labels-idx1-ubyte"
    with open(images, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(bytes(pixels))
    with open(labels, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(rows)))
        f.write(bytes(label for _, label in rows))
    print(f"wrote {len(rows)} images to {images}")


if __name__ == "__main__":
    main()
