#!/usr/bin/env python3
"""Download the UCI Energy Efficiency dataset and write data/energy.csv.

The CSV has a header row, the eight building features X1..X8, then the
two targets Y1 (heating load) and Y2 (cooling load) -- the layout the
experiment driver and acceptance suite expect. Requires network access
and either pandas+openpyxl/xlrd (to parse the source spreadsheet) or a
pre-downloaded file passed via --input.
"""

import argparse
import csv
import io
import sys
import urllib.request
import zipfile

URL = "https://archive.ics.uci.edu/static/public/242/energy+efficiency.zip"
COLUMNS = ["X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "Y1", "Y2"]


def load_frame(path_or_bytes):
    import pandas as pd

    df = pd.read_excel(path_or_bytes)
    df = df.dropna(axis=0, how="all").dropna(axis=1, how="all")
    if df.shape[1] < 10:
        raise SystemExit(f"expected 10 columns, got {df.shape[1]}")
    return df.iloc[:, :10]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", help="already-downloaded .xlsx or .zip instead of fetching")
    ap.add_argument("--output", default="data/energy.csv")
    args = ap.parse_args()

    if args.input and args.input.endswith(".csv"):
        raise SystemExit("--input should be the source .xlsx/.zip; the csv is the output")

    if args.input:
        raw = open(args.input, "rb").read()
    else:
        print(f"fetching {URL}")
        raw = urllib.request.urlopen(URL, timeout=60).read()

    if raw[:2] == b"PK" and (args.input or "").endswith(".zip") or not args.input:
        try:
            zf = zipfile.ZipFile(io.BytesIO(raw))
            name = next(n for n in zf.namelist() if n.lower().endswith((".xlsx", ".xls")))
            raw = zf.read(name)
        except zipfile.BadZipFile:
            pass  # already a spreadsheet

    df = load_frame(io.BytesIO(raw))

    import os

    os.makedirs(os.path.dirname(args.output) or ".", exist_ok=True)
    with open(args.output, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(COLUMNS)
        for row in df.itertuples(index=False):
            w.writerow([float(v) for v in row])
    print(f"wrote {args.output} ({df.shape[0]} rows)")


if __name__ == "__main__":
    sys.exit(main())
