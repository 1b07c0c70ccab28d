import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairsift.datamodel import (
    ConfigError,
    DataError,
    DatasetSpec,
    GroupCoverageError,
    apply_minmax,
    build_grouped_confusion,
    encode_dataset,
    fit_minmax,
    load_dataset,
    normalize_minmax,
)


def spec_dict(**overrides):
    base = {
        "name": "toy",
        "label_column": "label",
        "favorable_value": "yes",
        "protected_column": "sex",
        "privileged_value": "Male",
        "feature_columns": [
            {"name": "age", "kind": "numeric"},
            {"name": "city", "kind": "categorical"},
        ],
        "encoding": {"city": "one_hot"},
    }
    base.update(overrides)
    return base


TOY_CSV = """sex,age,city,label
Male,10,paris,yes
Female,20,rome,no
Male,30,paris,yes
Female,20,oslo,no
"""


def toy_spec(**overrides) -> DatasetSpec:
    return DatasetSpec.from_dict(spec_dict(**overrides))


class TestSpec:
    def test_label_protected_must_differ(self):
        with pytest.raises(ConfigError):
            toy_spec(protected_column="label")

    def test_special_columns_not_features(self):
        with pytest.raises(ConfigError):
            toy_spec(feature_columns=[{"name": "sex", "kind": "categorical"}])

    def test_unknown_encoding_rejected(self):
        with pytest.raises(ConfigError):
            toy_spec(encoding={"city": "ordinal"})

    def test_encoding_only_for_categorical(self):
        with pytest.raises(ConfigError):
            toy_spec(encoding={"age": "one_hot"})

    def test_value_lists_accepted(self):
        spec = toy_spec(privileged_value=["Male", "Other"])
        assert spec.privileged_value == ("Male", "Other")

    def test_roundtrip(self):
        spec = toy_spec()
        again = DatasetSpec.from_dict(spec.to_dict())
        assert again == spec


class TestLoad:
    def test_protected_mapping(self):
        ds = load_dataset(io.StringIO(TOY_CSV), toy_spec())
        assert ds.s.tolist() == [1, 0, 1, 0]
        assert ds.y.tolist() == [1, 0, 1, 0]

    def test_minmax_normalization(self):
        csv_text = "sex,age,label\nMale,10,yes\nFemale,20,no\nMale,30,yes\n"
        spec = toy_spec(feature_columns=[{"name": "age", "kind": "numeric"}],
                        encoding={})
        ds = load_dataset(io.StringIO(csv_text), spec)
        assert ds.X[:, 0].tolist() == [0.0, 0.5, 1.0]

    def test_constant_column_maps_to_zero(self):
        csv_text = "sex,age,label\nMale,7,yes\nFemale,7,no\n"
        spec = toy_spec(feature_columns=[{"name": "age", "kind": "numeric"}],
                        encoding={})
        ds = load_dataset(io.StringIO(csv_text), spec)
        assert ds.X[:, 0].tolist() == [0.0, 0.0]

    def test_one_hot_full_dummy(self):
        ds = load_dataset(io.StringIO(TOY_CSV), toy_spec())
        # three cities, none dropped
        assert ds.feature_names == ("age", "city=oslo", "city=paris", "city=rome")
        onehot = ds.X[:, 1:]
        assert np.all(onehot.sum(axis=1) == 1.0)

    def test_label_encode(self):
        ds = load_dataset(
            io.StringIO(TOY_CSV), toy_spec(encoding={"city": "label_encode"})
        )
        assert ds.feature_names == ("age", "city")
        # categories sorted: oslo=0, paris=1, rome=2, then min-max scaled
        assert ds.X[:, 1].tolist() == [0.5, 1.0, 0.5, 0.0]

    def test_multivalued_collapse_to_zero(self):
        csv_text = "sex,age,label\nMale,1,yes\nFemale,2,no\nNonBinary,3,no\n"
        spec = toy_spec(feature_columns=[{"name": "age", "kind": "numeric"}],
                        encoding={})
        ds = load_dataset(io.StringIO(csv_text), spec)
        assert ds.s.tolist() == [1, 0, 0]

    def test_missing_column_is_config_error(self):
        with pytest.raises(ConfigError, match="missing columns"):
            load_dataset(io.StringIO("sex,label\nMale,yes\nFemale,no\n"), toy_spec())

    def test_empty_file_is_data_error(self):
        with pytest.raises(DataError):
            load_dataset(io.StringIO(""), toy_spec())
        with pytest.raises(DataError):
            load_dataset(io.StringIO("sex,age,city,label\n"), toy_spec())

    def test_single_label_outcome_is_data_error(self):
        csv_text = "sex,age,city,label\nMale,1,a,yes\nFemale,2,b,yes\n"
        with pytest.raises(DataError, match="single outcome"):
            load_dataset(io.StringIO(csv_text), toy_spec())

    def test_absent_privileged_value_is_data_error(self):
        csv_text = "sex,age,city,label\nFemale,1,a,yes\nFemale,2,b,no\n"
        with pytest.raises(DataError, match="never occur"):
            load_dataset(io.StringIO(csv_text), toy_spec())

    def test_incomplete_rows_rejected_with_warning(self):
        csv_text = "sex,age,city,label\nMale,1,a,yes\nFemale,,b,no\nFemale,3,c,no\n"
        with pytest.warns(UserWarning, match="rejected 1 incomplete"):
            ds = load_dataset(io.StringIO(csv_text), toy_spec())
        assert ds.row_count == 2

    def test_non_numeric_value_is_data_error(self):
        csv_text = "sex,age,city,label\nMale,old,a,yes\nFemale,2,b,no\n"
        with pytest.raises(DataError, match="non-numeric"):
            load_dataset(io.StringIO(csv_text), toy_spec())

    def test_arrays_read_only(self):
        ds = load_dataset(io.StringIO(TOY_CSV), toy_spec())
        with pytest.raises(ValueError):
            ds.X[0, 0] = 5.0


class TestNormalization:
    @given(
        st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
            min_size=2,
            max_size=40,
        )
    )
    def test_idempotent(self, column):
        X = np.array(column).reshape(-1, 1)
        once = normalize_minmax(X)
        twice = normalize_minmax(once)
        assert np.allclose(once, twice, atol=1e-12)
        assert once.min() >= 0 and once.max() <= 1

    def test_fit_apply_split(self):
        train = np.array([[0.0], [10.0]])
        test = np.array([[5.0], [20.0]])
        mins, maxs = fit_minmax(train)
        out = apply_minmax(test, mins, maxs)
        assert out[:, 0].tolist() == [0.5, 2.0]  # test rows may exceed [0,1]


class TestGroupedConfusion:
    def test_cell_assignment(self):
        cm = build_grouped_confusion([1, 0, 1, 0], [1, 1, 0, 0], [1, 1, 0, 0])
        assert (cm.privileged.tp, cm.privileged.fp, cm.privileged.fn, cm.privileged.tn) == (1, 1, 0, 0)
        assert (cm.unprivileged.tp, cm.unprivileged.fp, cm.unprivileged.fn, cm.unprivileged.tn) == (0, 0, 1, 1)

    def test_perfect_prediction_no_errors(self):
        y = [1, 0, 1, 0, 1]
        cm = build_grouped_confusion(y, y, [1, 1, 0, 0, 1])
        assert cm.privileged.fp == cm.privileged.fn == 0
        assert cm.unprivileged.fp == cm.unprivileged.fn == 0

    def test_all_zero_predictions(self):
        cm = build_grouped_confusion([1, 0, 1, 0], [0, 0, 0, 0], [1, 0, 1, 0])
        assert cm.privileged.tp == cm.privileged.fp == 0
        assert cm.unprivileged.tp == cm.unprivileged.fp == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            build_grouped_confusion([1, 0], [1, 0, 1], [1, 0])

    def test_single_group_raises(self):
        with pytest.raises(GroupCoverageError):
            build_grouped_confusion([1, 0], [1, 0], [1, 1])

    @given(st.integers(min_value=2, max_value=80), st.integers(min_value=0, max_value=2**31))
    def test_cells_sum_to_length(self, n, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, n)
        p = rng.integers(0, 2, n)
        s = rng.integers(0, 2, n)
        if s.min() == s.max():
            s[0] = 1 - s[0]
        cm = build_grouped_confusion(y, p, s)
        assert cm.total == n

    def test_weighted_cells(self):
        cm = build_grouped_confusion(
            [1, 0, 1, 0], [1, 1, 0, 0], [1, 1, 0, 0], weights=[2.0, 1.0, 0.5, 3.0]
        )
        assert cm.weighted_privileged.tp == 2.0
        assert cm.weighted_unprivileged.tn == 3.0


class TestEncodingRoundTrip:
    @given(st.integers(min_value=2, max_value=60), st.integers(min_value=0, max_value=2**31))
    def test_group_sizes_match_raw_counts(self, n, seed):
        rng = np.random.default_rng(seed)
        sexes = rng.choice(["Male", "Female"], n)
        labels = rng.choice(["yes", "no"], n)
        # ensure both outcomes and both groups appear
        sexes[0], sexes[-1] = "Male", "Female"
        labels[0], labels[-1] = "yes", "no"
        lines = ["sex,age,label"] + [
            f"{s},{i},{l}" for i, (s, l) in enumerate(zip(sexes, labels))
        ]
        spec = toy_spec(feature_columns=[{"name": "age", "kind": "numeric"}],
                        encoding={})
        ds = encode_dataset(io.StringIO("\n".join(lines) + "\n"), spec)
        assert ds.s.sum() == (sexes == "Male").sum()
        assert ds.y.sum() == (labels == "yes").sum()
