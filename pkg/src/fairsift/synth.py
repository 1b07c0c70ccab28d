"""Synthetic binary-classification data with a planted group bias.

The generator controls P(favorable | group) directly through ``bias_gap``:
group A (privileged) gets base_rate + gap/2, group B gets base_rate - gap/2,
with exact counts rather than Bernoulli draws so the planted disparity is not
washed out by sampling noise.

Three numeric features carry label signal, one is pure noise, and one is a
*group proxy* (group membership plus noise).  Under a zero gap the proxy is
uninformative about the label, so a classifier stays fair; with a planted gap
the proxy becomes predictive and the classifier picks up group-dependent
behavior, the way proxy features leak bias in real data.  A categorical
column exercises the one-hot encoding path.
"""

import csv
import json

import numpy as np

from .datamodel import DatasetSpec

GROUP_COLUMN = "group"
LABEL_COLUMN = "outcome"
PRIVILEGED = "A"
UNPRIVILEGED = "B"
FAVORABLE = "yes"
UNFAVORABLE = "no"

_SIGNALS = (1.0, 0.8, 0.6)  # label coefficient per numeric feature
_NOISES = (0.55, 0.65, 0.75)  # noise scale per numeric feature
_PROXY_NOISE = 0.25  # noise on the group-proxy feature


def synthetic_spec(name: str) -> DatasetSpec:
    return DatasetSpec.from_dict(spec_dict(name))


def generate_rows(
    n_rows: int,
    bias_gap: float,
    seed: int,
    base_rate: float = 0.5,
) -> tuple[list[str], list[list[str]]]:
    """Header and raw CSV rows for one synthetic dataset."""
    if n_rows < 20:
        raise ValueError("need at least 20 rows")
    lo = base_rate - bias_gap / 2.0
    hi = base_rate + bias_gap / 2.0
    if not (0.0 < lo and hi < 1.0):
        raise ValueError(f"bias_gap {bias_gap} incompatible with base_rate {base_rate}")
    rng = np.random.default_rng(seed)

    n_priv = n_rows // 2
    n_unpriv = n_rows - n_priv
    s = np.concatenate([np.ones(n_priv, dtype=int), np.zeros(n_unpriv, dtype=int)])

    y = np.zeros(n_rows, dtype=int)
    for rate, size, offset in ((hi, n_priv, 0), (lo, n_unpriv, n_priv)):
        favorable = int(round(rate * size))
        idx = offset + rng.permutation(size)[:favorable]
        y[idx] = 1

    order = rng.permutation(n_rows)
    s, y = s[order], y[order]

    features = [
        coef * y + rng.normal(0.0, scale, n_rows)
        for coef, scale in zip(_SIGNALS, _NOISES)
    ]
    features.append(s + rng.normal(0.0, _PROXY_NOISE, n_rows))  # group proxy
    features.append(rng.normal(0.0, 1.0, n_rows))  # pure noise column

    # a 3-level categorical carrying weak label signal, to exercise one-hot
    latent = y + rng.normal(0.0, 0.9, n_rows)
    tercile = np.quantile(latent, [1 / 3, 2 / 3])
    tier = np.where(latent < tercile[0], "low", np.where(latent < tercile[1], "mid", "high"))

    header = [GROUP_COLUMN, LABEL_COLUMN, "f1", "f2", "f3", "proxy", "noise", "tier"]
    rows = []
    for i in range(n_rows):
        rows.append(
            [
                PRIVILEGED if s[i] == 1 else UNPRIVILEGED,
                FAVORABLE if y[i] == 1 else UNFAVORABLE,
                f"{features[0][i]:.6f}",
                f"{features[1][i]:.6f}",
                f"{features[2][i]:.6f}",
                f"{features[3][i]:.6f}",
                f"{features[4][i]:.6f}",
                tier[i],
            ]
        )
    return header, rows


def spec_dict(name: str) -> dict:
    return {
        "name": name,
        "label_column": LABEL_COLUMN,
        "favorable_value": FAVORABLE,
        "protected_column": GROUP_COLUMN,
        "privileged_value": PRIVILEGED,
        "feature_columns": [
            {"name": "f1", "kind": "numeric"},
            {"name": "f2", "kind": "numeric"},
            {"name": "f3", "kind": "numeric"},
            {"name": "proxy", "kind": "numeric"},
            {"name": "noise", "kind": "numeric"},
            {"name": "tier", "kind": "categorical"},
        ],
        "encoding": {"tier": "one_hot"},
    }


def write_dataset(
    data_path, spec_path, name: str, n_rows: int, bias_gap: float, seed: int
) -> None:
    header, rows = generate_rows(n_rows, bias_gap, seed)
    with open(data_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    with open(spec_path, "w", encoding="utf-8") as fh:
        json.dump(spec_dict(name), fh, indent=2, sort_keys=True)
        fh.write("\n")
