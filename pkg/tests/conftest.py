import io

import numpy as np
import pytest
from hypothesis import settings

from fairsift.datamodel import encode_dataset
from fairsift.harness import ExperimentConfig, run_experiment
from fairsift.synth import generate_rows, synthetic_spec

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def rows_to_csv_text(header, rows) -> str:
    out = [",".join(header)]
    out.extend(",".join(r) for r in rows)
    return "\n".join(out) + "\n"


def make_synthetic(name: str, n_rows: int, bias_gap: float, seed: int):
    header, rows = generate_rows(n_rows, bias_gap, seed)
    return encode_dataset(io.StringIO(rows_to_csv_text(header, rows)),
                          synthetic_spec(name))


@pytest.fixture(scope="session")
def small_experiment():
    """One biased synthetic dataset pushed through the full harness (fast)."""
    ds = make_synthetic("smallbias", 300, 0.4, seed=11)
    return run_experiment([ds], ExperimentConfig())


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(2024)
