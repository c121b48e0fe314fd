#!/usr/bin/env python3
"""Download the five UCI regression tables used by the benchmark suite and
convert each to the layout the tools expect: numeric feature columns named
x0..x{D-1} followed by a final `target` column, one CSV per dataset.

    python3 scripts/prepare_data.py            # writes into data/
    python3 scripts/prepare_data.py --dest DIR --only yacht,wine

Requires network access to archive.ics.uci.edu. The two spreadsheet-based
datasets additionally need third-party readers:

    pip install openpyxl   # energy (ENB2012_data.xlsx)
    pip install xlrd       # concrete (Concrete_Data.xls)

Targets follow the benchmark convention: yacht = residuary resistance,
energy = Y1 (heating load), airfoil = scaled sound pressure level,
concrete = compressive strength, wine = quality (red and white combined).

data/manifest.json lists the expected row/feature counts; the trainer
cross-checks loaded files against it and prints warnings on mismatch.
Note the airfoil source file has 1503 rows while the benchmark table
reports 1502, so a one-row warning for airfoil is expected and harmless.
"""

import argparse
import csv
import io
import sys
import urllib.request
from pathlib import Path

BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"

DATASETS = ["yacht", "energy", "airfoil", "concrete", "wine"]


def fetch(url: str) -> bytes:
    print(f"  fetching {url}")
    with urllib.request.urlopen(url, timeout=120) as response:
        return response.read()


def write_table(dest: Path, name: str, rows: list[list[float]]) -> None:
    dims = len(rows[0]) - 1
    for i, row in enumerate(rows):
        if len(row) != dims + 1:
            raise ValueError(f"{name}: row {i} has {len(row)} fields, expected {dims + 1}")
    path = dest / f"{name}.csv"
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"x{d}" for d in range(dims)] + ["target"])
        writer.writerows(rows)
    print(f"  wrote {path} ({len(rows)} rows, {dims} features + target)")


def parse_whitespace(raw: bytes, expected_fields: int) -> list[list[float]]:
    rows = []
    for line in raw.decode("utf-8", errors="replace").splitlines():
        fields = line.split()
        if not fields:
            continue
        if len(fields) != expected_fields:
            raise ValueError(f"line {line!r} has {len(fields)} fields, expected {expected_fields}")
        rows.append([float(v) for v in fields])
    return rows


def prepare_yacht(dest: Path) -> None:
    raw = fetch(f"{BASE}/00243/yacht_hydrodynamics.data")
    write_table(dest, "yacht", parse_whitespace(raw, 7))


def prepare_airfoil(dest: Path) -> None:
    raw = fetch(f"{BASE}/00291/airfoil_self_noise.dat")
    write_table(dest, "airfoil", parse_whitespace(raw, 6))


def prepare_energy(dest: Path) -> None:
    try:
        import openpyxl
    except ImportError:
        raise RuntimeError("the energy dataset is an .xlsx file; pip install openpyxl")
    raw = fetch(f"{BASE}/00242/ENB2012_data.xlsx")
    book = openpyxl.load_workbook(io.BytesIO(raw), read_only=True, data_only=True)
    sheet = book.worksheets[0]
    rows = []
    for record in sheet.iter_rows(min_row=2, values_only=True):
        # Columns: X1..X8, Y1 (heating load, the benchmark target), Y2.
        values = list(record[:9])
        if values[0] is None:
            continue
        rows.append([float(v) for v in values])
    write_table(dest, "energy", rows)


def prepare_concrete(dest: Path) -> None:
    try:
        import xlrd
    except ImportError:
        raise RuntimeError("the concrete dataset is an .xls file; pip install xlrd")
    raw = fetch(f"{BASE}/concrete/compressive/Concrete_Data.xls")
    book = xlrd.open_workbook(file_contents=raw)
    sheet = book.sheet_by_index(0)
    rows = []
    for i in range(1, sheet.nrows):
        values = sheet.row_values(i)[:9]
        if values[0] in ("", None):
            continue
        rows.append([float(v) for v in values])
    write_table(dest, "concrete", rows)


def prepare_wine(dest: Path) -> None:
    rows = []
    for color in ("red", "white"):
        raw = fetch(f"{BASE}/wine-quality/winequality-{color}.csv")
        reader = csv.reader(io.StringIO(raw.decode("utf-8")), delimiter=";")
        next(reader)  # header
        for fields in reader:
            if not fields:
                continue
            rows.append([float(v) for v in fields])
    write_table(dest, "wine", rows)


PREPARERS = {
    "yacht": prepare_yacht,
    "energy": prepare_energy,
    "airfoil": prepare_airfoil,
    "concrete": prepare_concrete,
    "wine": prepare_wine,
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dest", type=Path, default=Path("data"))
    parser.add_argument(
        "--only",
        type=lambda s: s.split(","),
        default=DATASETS,
        help="comma-separated subset of: " + ",".join(DATASETS),
    )
    args = parser.parse_args()
    args.dest.mkdir(parents=True, exist_ok=True)

    failures = []
    for name in args.only:
        if name not in PREPARERS:
            print(f"unknown dataset {name!r}; choices: {','.join(DATASETS)}")
            failures.append(name)
            continue
        print(f"preparing {name}")
        try:
            PREPARERS[name](args.dest)
        except Exception as error:  # noqa: BLE001 - report and continue
            print(f"  FAILED: {error}")
            failures.append(name)
    if failures:
        print(f"failed: {', '.join(failures)}")
        return 1
    print("all datasets prepared")
    return 0


if __name__ == "__main__":
    sys.exit(main())
