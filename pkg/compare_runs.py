import csv
import json
import sys
from pathlib import Path


def load_rows(path):
    path = Path(path)
    with path.open(encoding="utf-8") as infile:
        if path.suffix == ".json":
            return json.load(infile)
        return list(csv.DictReader(infile))


def get_clean_row(row):
    return {key: value for key, value in row.items() if value not in (None, "") and key != "timestamp"}


def dict_diff(dict1, dict2):
    all_keys = set(dict1.keys()) | set(dict2.keys())

    differences = {}
    for key in all_keys:
        val1 = dict1.get(key, None)
        val2 = dict2.get(key, None)

        if val1 != val2:
            differences[key] = (val1, val2)

    return differences


def compare_runs(first_path, second_path) -> int:
    first, second = load_rows(first_path), load_rows(second_path)
    if len(first) != len(second):
        print(f"Row counts differ: {len(first)} vs {len(second)}")
        return 1

    changed = 0
    for index, (old, new) in enumerate(zip(first, second)):
        differences = dict_diff(get_clean_row(old), get_clean_row(new))
        if differences:
            changed += 1
            print(f"Difference found in row {index}:")
            print(json.dumps(differences, indent=2))

    print(f"{len(first)} rows compared, {changed} differ")
    return 1 if changed else 0


def main():
    if len(sys.argv) != 3:
        print("usage: python compare_runs.py FIRST SECOND")
        return 2
    return compare_runs(sys.argv[1], sys.argv[2])


if __name__ == "__main__":
    sys.exit(main())
