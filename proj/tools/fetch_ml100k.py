#!/usr/bin/env python3
"""Rebuild the MovieLens 100K raw files (u.data, u.user, u.item, u.occupation,
u.genre) from the copy bundled inside the pytorch-widedeep wheel.

The GroupLens download host is often unreachable from build machines while a
PyPI mirror is not, so this pulls the wheel with pip and writes the files in
the official layout. Usage:

    python3 tools/fetch_ml100k.py [--out data/ml-100k] [--wheel path.whl]
"""
import argparse
import glob
import io
import os
import subprocess
import sys
import tempfile
import zipfile

import pandas as pd

WHEEL_PKG = "pytorch-widedeep==1.7.0"
PREFIX = "pytorch_widedeep/datasets/data/MovieLens100k_"

GENRES = ["unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
          "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
          "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western"]

OCCUPATIONS = ["administrator", "artist", "doctor", "educator", "engineer",
               "entertainment", "executive", "healthcare", "homemaker", "lawyer",
               "librarian", "marketing", "none", "other", "programmer", "retired",
               "salesman", "scientist", "student", "technician", "writer"]


def locate_wheel(explicit):
    if explicit:
        return explicit
    tmp = tempfile.mkdtemp(prefix="ml100k-")
    subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps",
                           WHEEL_PKG, "-d", tmp])
    return glob.glob(os.path.join(tmp, "*.whl"))[0]


def read_frame(zf, name):
    return pd.read_parquet(io.BytesIO(zf.read(PREFIX + name + ".parquet.brotli")))


def cell(value):
    if value is None or (isinstance(value, float) and pd.isna(value)):
        return ""
    return str(value)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/ml-100k")
    ap.add_argument("--wheel", default=None)
    args = ap.parse_args()

    zf = zipfile.ZipFile(locate_wheel(args.wheel))
    ratings = read_frame(zf, "data")
    items = read_frame(zf, "items")
    users = read_frame(zf, "users")
    os.makedirs(args.out, exist_ok=True)

    with open(os.path.join(args.out, "u.data"), "w", newline="\n") as f:
        for r in ratings.itertuples(index=False):
            f.write(f"{r.user_id}\t{r.movie_id}\t{r.rating}\t{r.timestamp}\n")

    with open(os.path.join(args.out, "u.user"), "w", newline="\n") as f:
        for u in users.itertuples(index=False):
            f.write(f"{u.user_id}|{u.age}|{u.gender}|{u.occupation}|{u.zip_code}\n")

    with open(os.path.join(args.out, "u.item"), "w", newline="\n", encoding="latin-1") as f:
        for row in items.itertuples(index=False):
            fields = [cell(row[0]), cell(row[1]), cell(row[2]), cell(row[3]), cell(row[4])]
            fields += [cell(int(v)) for v in list(row)[5:5 + len(GENRES)]]
            f.write("|".join(fields) + "\n")

    with open(os.path.join(args.out, "u.occupation"), "w", newline="\n") as f:
        f.write("\n".join(OCCUPATIONS) + "\n")
    with open(os.path.join(args.out, "u.genre"), "w", newline="\n") as f:
        f.write("".join(f"{g}|{i}\n" for i, g in enumerate(GENRES)) + "\n")

    print(f"wrote {len(ratings)} ratings, {len(users)} users, {len(items)} items to {args.out}")


if __name__ == "__main__":
    main()
