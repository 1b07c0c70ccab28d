#!/usr/bin/env python3
"""Convert the UCI Statlog German Credit file into fairsift inputs.

The raw ``german.data`` file (1,000 rows, space-separated, no header) is not
redistributed here; download it from the UCI repository and point this script
at it.  Output: a headered CSV with a derived binary ``sex`` column (the UCI
codebook folds sex into attribute 9) plus a matching dataset spec JSON, ready
for ``fairsift experiment --data german.csv --spec german.spec.json``.

Usage:
    python scripts/prepare_german.py path/to/german.data out_dir/
"""

import csv
import json
import sys
from pathlib import Path

COLUMNS = [
    ("checking_status", "categorical"),
    ("duration_months", "numeric"),
    ("credit_history", "categorical"),
    ("purpose", "categorical"),
    ("credit_amount", "numeric"),
    ("savings_status", "categorical"),
    ("employment_since", "categorical"),
    ("installment_rate", "numeric"),
    ("personal_status", "categorical"),  # replaced by the derived sex column
    ("other_debtors", "categorical"),
    ("residence_since", "numeric"),
    ("property", "categorical"),
    ("age_years", "numeric"),
    ("other_installment_plans", "categorical"),
    ("housing", "categorical"),
    ("existing_credits", "numeric"),
    ("job", "categorical"),
    ("num_dependents", "numeric"),
    ("telephone", "categorical"),
    ("foreign_worker", "categorical"),
]

# UCI codebook for attribute 9 (personal status and sex)
MALE_CODES = {"A91", "A93", "A94"}
FEMALE_CODES = {"A92", "A95"}


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    src = Path(sys.argv[1])
    out_dir = Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    with open(src, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != len(COLUMNS) + 1:
                raise SystemExit(f"unexpected field count {len(parts)} in line: {line!r}")
            rows.append(parts)

    header = [name for name, _ in COLUMNS if name != "personal_status"]
    header += ["sex", "credit"]
    csv_path = out_dir / "german.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for parts in rows:
            record = dict(zip([name for name, _ in COLUMNS], parts[:-1]))
            code = record.pop("personal_status")
            if code in MALE_CODES:
                sex = "male"
            elif code in FEMALE_CODES:
                sex = "female"
            else:
                raise SystemExit(f"unknown personal_status code {code!r}")
            label = "good" if parts[-1] == "1" else "bad"
            writer.writerow([record[name] for name, _ in COLUMNS
                             if name != "personal_status"] + [sex, label])

    spec = {
        "name": "german_credit",
        "label_column": "credit",
        "favorable_value": "good",
        "protected_column": "sex",
        "privileged_value": "male",
        "feature_columns": [
            {"name": name, "kind": kind}
            for name, kind in COLUMNS
            if name != "personal_status"
        ],
        "encoding": {
            name: "one_hot"
            for name, kind in COLUMNS
            if kind == "categorical" and name != "personal_status"
        },
    }
    spec_path = out_dir / "german.spec.json"
    with open(spec_path, "w", encoding="utf-8") as fh:
        json.dump(spec, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {csv_path} ({len(rows)} rows) and {spec_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
