#!/usr/bin/env python3
"""Fetch the UCI Adult and German Credit files and write header-row CSVs.

The raw UCI files are taken from the `responsibly` wheel on PyPI, which
ships unmodified copies of adult.data, adult.test and german.data. The
UCI archive itself is used when reachable and --source=uci is given.

Output (default ./data):
  adult.csv   48,842 rows, 15 columns, '?' marks missing values
  german.csv  1,000 rows, 21 columns, coded attributes kept verbatim
"""
import argparse
import csv
import pathlib
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]

GERMAN_COLUMNS = [
    "status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "employment", "installment_rate", "personal_status",
    "other_debtors", "residence_since", "property", "age",
    "installment_plans", "housing", "existing_credits", "job",
    "people_liable", "telephone", "foreign_worker", "credit",
]

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"
WHEEL_PREFIX = "responsibly/dataset"


def raw_from_wheel(workdir: pathlib.Path) -> dict:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps",
         "responsibly==0.1.2", "-d", str(workdir)],
        check=True, stdout=subprocess.DEVNULL)
    wheel = next(workdir.glob("responsibly-*.whl"))
    with zipfile.ZipFile(wheel) as z:
        return {
            "adult.data": z.read(f"{WHEEL_PREFIX}/adult/adult.data").decode(),
            "adult.test": z.read(f"{WHEEL_PREFIX}/adult/adult.test").decode(),
            "german.data": z.read(f"{WHEEL_PREFIX}/german/german.data").decode(),
        }


def raw_from_uci() -> dict:
    def get(url):
        with urllib.request.urlopen(url, timeout=60) as r:
            return r.read().decode()
    return {
        "adult.data": get(f"{UCI}/adult/adult.data"),
        "adult.test": get(f"{UCI}/adult/adult.test"),
        "german.data": get(f"{UCI}/statlog/german/german.data"),
    }


def adult_rows(text: str):
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("|"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != len(ADULT_COLUMNS):
            continue
        fields[-1] = fields[-1].rstrip(".")
        yield fields


def german_rows(text: str):
    for line in text.splitlines():
        fields = line.split()
        if len(fields) != len(GERMAN_COLUMNS):
            continue
        fields[-1] = "good" if fields[-1] == "1" else "bad"
        yield fields


def write_csv(path: pathlib.Path, header, rows) -> int:
    count = 0
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)
            count += 1
    return count


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data")
    ap.add_argument("--source", choices=["wheel", "uci"], default="wheel")
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.source == "uci":
        raw = raw_from_uci()
    else:
        with tempfile.TemporaryDirectory() as tmp:
            raw = raw_from_wheel(pathlib.Path(tmp))

    adult = list(adult_rows(raw["adult.data"])) + list(adult_rows(raw["adult.test"]))
    n_adult = write_csv(out / "adult.csv", ADULT_COLUMNS, adult)
    n_german = write_csv(out / "german.csv", GERMAN_COLUMNS, german_rows(raw["german.data"]))
    print(f"adult.csv: {n_adult} rows\ngerman.csv: {n_german} rows")
    return 0


if __name__ == "__main__":
    sys.exit(main())
