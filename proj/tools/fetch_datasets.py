#!/usr/bin/env python3
"""Materialize the benchmark datasets under data/.

The public hosts for these datasets are often unreachable from build
machines, so the files are pulled out of PyPI wheels that happen to ship
them:

  MovieLens-100K ratings  pytorch-widedeep==1.7.0  (u.data columns, parquet)
  FilmTrust ratings       librec-auto==0.0.50      (demo/data/filmtrust.txt)
  Ciao ratings + trust    neurec==1.0.0            (a filtered Ciao dump)

The FilmTrust trust file is not available from any package index; drop
it at data/filmtrust/trust.txt by hand if you have it.

Usage: tools/fetch_datasets.py [--data-dir DIR]
"""

import argparse
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

WHEELS = {
    "pytorch-widedeep==1.7.0": "pytorch_widedeep-1.7.0-py3-none-any.whl",
    "librec-auto==0.0.50": "librec_auto-0.0.50-py3-none-any.whl",
    "neurec==1.0.0": "neurec-1.0.0-py3-none-any.whl",
}


def download(spec, dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", str(dest), spec],
        check=True,
    )
    return zipfile.ZipFile(dest / WHEELS[spec])


def write_lines(path, lines):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for line in lines:
            out.write(line + "\n")
    print(f"wrote {path} ({len(lines)} lines)")


def movielens_100k(tmp, root):
    import pandas as pd

    wheel = download("pytorch-widedeep==1.7.0", tmp)
    blob = wheel.read("pytorch_widedeep/datasets/data/MovieLens100k_data.parquet.brotli")
    frame = pd.read_parquet(io.BytesIO(blob))
    lines = [
        f"{u}\t{i}\t{r}\t{t}"
        for u, i, r, t in frame[["user_id", "movie_id", "rating", "timestamp"]].itertuples(index=False)
    ]
    write_lines(root / "ml-100k" / "u.data", lines)


def filmtrust(tmp, root):
    wheel = download("librec-auto==0.0.50", tmp)
    text = wheel.read("librec_auto/demo/data/filmtrust.txt").decode("utf-8")
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    write_lines(root / "filmtrust" / "ratings.txt", lines)


def ciao(tmp, root):
    wheel = download("neurec==1.0.0", tmp)
    for name, target in (("Ciao.rating", "ratings.txt"), ("Ciao.trust", "trust.txt")):
        text = wheel.read(f"neurec/dataset/{name}").decode("utf-8")
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        write_lines(root / "ciao" / target, lines)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default_dir = pathlib.Path(__file__).resolve().parent.parent / "data"
    parser.add_argument("--data-dir", type=pathlib.Path, default=default_dir)
    args = parser.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        movielens_100k(tmp, args.data_dir)
        filmtrust(tmp, args.data_dir)
        ciao(tmp, args.data_dir)


if __name__ == "__main__":
    main()
