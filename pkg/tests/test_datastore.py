import json

import numpy as np
import pytest

from riskd.datastore import (
    MISSING_MARKERS,
    Clause,
    CohortFilter,
    Dataset,
    VariableDef,
    apply_cohort,
    cohort_mask,
    load_dataset,
    serialize_dataset,
)
from riskd.errors import (
    InvalidCode,
    MalformedFile,
    MissingWeights,
    TypeMismatch,
    UnknownVariable,
)

DICT = [
    {"id": "SEQN", "label": "Subject id", "kind": "continuous",
     "category": "demographic"},
    {"id": "RIDAGEYR", "label": "Age in years", "kind": "continuous",
     "unit": "years", "category": "demographic"},
    {"id": "RIAGENDR", "label": "Gender", "kind": "categorical",
     "codebook": {"1": "Male", "2": "Female"}, "category": "demographic"},
    {"id": "LBXBPB", "label": "Blood lead", "kind": "continuous",
     "unit": "ug/dL", "category": "exposure"},
    {"id": "WTMEC2YR", "label": "Exam weight", "kind": "continuous",
     "category": "weight"},
]

CSV = """SEQN,RIDAGEYR,RIAGENDR,LBXBPB,WTMEC2YR
101,34,1,1.2,5000
102,61,2,0.8,7200
103,47,2,,6100
104,29,1,2.4,4900
"""


def write_pair(tmp_path, csv_text=CSV, dictionary=DICT):
    data = tmp_path / "extract.csv"
    dic = tmp_path / "extract.dict.json"
    data.write_text(csv_text)
    dic.write_text(json.dumps(dictionary))
    return data, dic


def test_load_basic(tmp_path):
    ds = load_dataset(*write_pair(tmp_path))
    assert ds.n_rows == 4
    assert ds.variable_ids == ("SEQN", "RIDAGEYR", "RIAGENDR", "LBXBPB",
                               "WTMEC2YR")
    assert ds.subject_ids == ("101", "102", "103", "104")
    assert ds.weight_var == "WTMEC2YR"
    np.testing.assert_array_equal(ds.weights, [5000, 7200, 6100, 4900])
    assert np.isnan(ds.column("LBXBPB")[2])


@pytest.mark.parametrize("marker", sorted(MISSING_MARKERS))
def test_missing_markers(tmp_path, marker):
    csv_text = CSV.replace(",1.2,", f",{marker},")
    ds = load_dataset(*write_pair(tmp_path, csv_text))
    assert np.isnan(ds.column("LBXBPB")[0])


def test_unknown_categorical_code_rejected(tmp_path):
    csv_text = CSV.replace("102,61,2", "102,61,9")
    with pytest.raises(InvalidCode):
        load_dataset(*write_pair(tmp_path, csv_text))


def test_non_integer_code_rejected(tmp_path):
    csv_text = CSV.replace("102,61,2", "102,61,1.5")
    with pytest.raises(InvalidCode):
        load_dataset(*write_pair(tmp_path, csv_text))


def test_unparseable_cell(tmp_path):
    csv_text = CSV.replace("0.8", "abc")
    with pytest.raises(MalformedFile):
        load_dataset(*write_pair(tmp_path, csv_text))


def test_ragged_row_rejected(tmp_path):
    csv_text = CSV + "105,50\n"
    with pytest.raises(MalformedFile):
        load_dataset(*write_pair(tmp_path, csv_text))


def test_column_missing_from_dictionary(tmp_path):
    with pytest.raises(UnknownVariable):
        load_dataset(*write_pair(tmp_path, dictionary=DICT[:-1]))


def test_weight_column_required(tmp_path):
    no_weight = [dict(d) for d in DICT]
    no_weight[-1]["category"] = "exposure"
    with pytest.raises(MissingWeights):
        load_dataset(*write_pair(tmp_path, dictionary=no_weight))


def test_duplicate_dictionary_ids(tmp_path):
    with pytest.raises(MalformedFile):
        load_dataset(*write_pair(tmp_path, dictionary=DICT + [DICT[1]]))


def test_round_trip_bitwise(tmp_path):
    ds = load_dataset(*write_pair(tmp_path))
    out_csv = tmp_path / "again.csv"
    out_dict = tmp_path / "again.dict.json"
    serialize_dataset(ds, out_csv, out_dict)
    again = load_dataset(out_csv, out_dict)
    assert ds.cells_equal(again)
    assert again.subject_ids == ds.subject_ids
    assert [v.to_json() for v in again.dictionary] == \
        [v.to_json() for v in ds.dictionary]


def test_subset_preserves_metadata(tmp_path):
    ds = load_dataset(*write_pair(tmp_path))
    sub = ds.subset(np.array([2, 0]))
    assert sub.n_rows == 2
    assert sub.subject_ids == ("103", "101")
    assert sub.weight_var == "WTMEC2YR"
    np.testing.assert_array_equal(sub.column("RIDAGEYR"), [47, 34])


def test_cohort_mask_and_apply(tmp_path):
    ds = load_dataset(*write_pair(tmp_path))
    filt = CohortFilter(clauses=(Clause("RIDAGEYR", ">=", 30.0),
                                 Clause("RIAGENDR", "in", (2.0,))))
    mask = cohort_mask(ds, filt)
    np.testing.assert_array_equal(mask, [False, True, True, False])
    kept, n_kept, n_dropped = apply_cohort(ds, filt)
    assert kept.subject_ids == ("102", "103")
    assert (n_kept, n_dropped) == (2, 2)


def test_cohort_missing_cell_excluded(tmp_path):
    # rows with a missing filter variable never match
    csv_text = CSV.replace("102,61", "102,NA")
    ds = load_dataset(*write_pair(tmp_path, csv_text))
    mask = cohort_mask(ds, CohortFilter(clauses=(
        Clause("RIDAGEYR", ">=", 0.0),)))
    np.testing.assert_array_equal(mask, [True, False, True, True])


def test_impossible_filter_keeps_nothing(tmp_path):
    # the subset step itself tolerates an empty result; analysis layers
    # are the ones that refuse to run on zero rows
    ds = load_dataset(*write_pair(tmp_path))
    kept, n_kept, n_dropped = apply_cohort(ds, CohortFilter(clauses=(
        Clause("RIDAGEYR", ">=", 200.0),)))
    assert n_kept == 0
    assert n_dropped == 4
    assert kept.subject_ids == ()


def test_ordered_comparator_on_categorical_rejected(tmp_path):
    ds = load_dataset(*write_pair(tmp_path))
    filt = CohortFilter(clauses=(Clause("RIAGENDR", ">=", 1.0),))
    with pytest.raises(TypeMismatch):
        filt.validate_against(ds.dictionary)


def test_unknown_filter_variable(tmp_path):
    ds = load_dataset(*write_pair(tmp_path))
    filt = CohortFilter(clauses=(Clause("NOPE", ">=", 1.0),))
    with pytest.raises(UnknownVariable):
        filt.validate_against(ds.dictionary)


def test_dataset_rows_read_only(tmp_path):
    ds = load_dataset(*write_pair(tmp_path))
    with pytest.raises(ValueError):
        ds.rows[0, 0] = 999.0


def test_variable_def_validation():
    with pytest.raises(Exception):
        VariableDef(id="X", label="x", kind="nonsense").validate()
    with pytest.raises(Exception):
        # one code is not a categorical split
        VariableDef(id="X", label="x", kind="categorical",
                    codebook={"1": "yes"}).validate()
    v = VariableDef(id="X", label="x", kind="categorical",
                    codebook={"1": "yes", "2": "no"})
    v.validate()
    assert v.to_json()["codebook"] == {"1": "yes", "2": "no"}


def test_cells_equal_detects_difference(tmp_path):
    ds = load_dataset(*write_pair(tmp_path))
    other = Dataset(dictionary=ds.dictionary,
                    rows=np.array(ds.rows, copy=True),
                    subject_ids=ds.subject_ids, weight_var=ds.weight_var)
    assert ds.cells_equal(other)
    mutated = np.array(ds.rows, copy=True)
    mutated[0, 1] = 35.0
    assert not ds.cells_equal(Dataset(dictionary=ds.dictionary, rows=mutated,
                                      subject_ids=ds.subject_ids,
                                      weight_var=ds.weight_var))
