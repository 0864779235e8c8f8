import csv
import json

import numpy as np
import pytest

from attribench.dataio import (DatasetFormatError, MissingAnnotationError, load_dataset,
                               load_tabular_csv, save_dataset, sidecar_path,
                               write_attribution_dump)
from attribench.symfunc import NoiseSpec, generate_dataset


@pytest.fixture
def dataset():
    return generate_dataset(9, NoiseSpec(6, "std_normal", 0.05, 31), 250, 0.8)


def test_round_trip_bit_exact(tmp_path, dataset):
    path = save_dataset(dataset, tmp_path / "d.csv")
    back = load_dataset(path)
    assert np.array_equal(back.features, dataset.features)
    assert np.array_equal(back.targets, dataset.targets)
    assert np.array_equal(back.is_train, dataset.is_train)
    assert back.predictive_indices == dataset.predictive_indices
    assert back.meta["function_id"] == 9 and back.meta["seed"] == 31


def test_sidecar_contents(tmp_path, dataset):
    save_dataset(dataset, tmp_path / "d.csv")
    side = json.loads(sidecar_path(tmp_path / "d.csv").read_text())
    assert side["format_version"] == 1
    assert side["predictive_indices"] == [0, 1, 2, 3]
    assert len(side["validation_rows"]) == 50


def test_missing_sidecar(tmp_path, dataset):
    path = save_dataset(dataset, tmp_path / "d.csv")
    sidecar_path(path).unlink()
    with pytest.raises(MissingAnnotationError):
        load_dataset(path)


def test_foreign_csv_degraded_mode(tmp_path):
    path = tmp_path / "foreign.csv"
    path.write_text("a,b,target\n1,2,3\n4,5,6\n7,8,9\n0,1,2\n1,1,1\n")
    d = load_dataset(path, require_annotation=False)
    assert d.predictive_indices == ()
    assert d.features.shape == (5, 2)
    assert np.array_equal(d.targets, [3, 6, 9, 2, 1])
    assert d.is_train.sum() == 4


def test_version_mismatch(tmp_path, dataset):
    path = save_dataset(dataset, tmp_path / "d.csv")
    side = json.loads(sidecar_path(path).read_text())
    side["format_version"] = 7
    sidecar_path(path).write_text(json.dumps(side))
    with pytest.raises(DatasetFormatError):
        load_dataset(path)


def test_schema_mismatch(tmp_path, dataset):
    path = save_dataset(dataset, tmp_path / "d.csv")
    text = path.read_text().splitlines()
    text[0] = text[0].replace("x0", "feature0")
    path.write_text("\n".join(text) + "\n")
    with pytest.raises(DatasetFormatError):
        load_dataset(path)


def _write(path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def test_non_numeric_cell_reports_location(tmp_path):
    path = _write(tmp_path / "bad.csv", ["a", "b", "label"], [[1, 2, 0], [3, "oops", 1]])
    with pytest.raises(DatasetFormatError, match=r"row 3.*'b'"):
        load_tabular_csv(path, "label")


def test_minmax_training_rows_in_unit_interval(tmp_path):
    rng = np.random.default_rng(0)
    rows = np.column_stack([rng.normal(5, 3, 300), rng.uniform(-10, 0, 300), np.full(300, 4.0),
                            rng.integers(0, 2, 300)])
    path = _write(tmp_path / "t.csv", ["a", "b", "const", "label"], rows.tolist())
    d = load_tabular_csv(path, "label", scaling="minmax")
    tr = d.features[d.is_train]
    assert tr.min() >= 0.0 and tr.max() <= 1.0
    assert np.allclose(tr[:, :2].min(axis=0), 0) and np.allclose(tr[:, :2].max(axis=0), 1)
    assert np.all(d.features[:, 2] == 0.0)
    assert d.feature_names == ["a", "b", "const"]
    assert d.predictive_indices == ()


def test_unknown_label_column(tmp_path):
    path = _write(tmp_path / "t.csv", ["a", "y"], [[1, 0]])
    with pytest.raises(DatasetFormatError):
        load_tabular_csv(path, "label")


def test_undersample_equalizes_classes(tmp_path):
    rng = np.random.default_rng(1)
    y = (rng.random(1000) < 0.2).astype(int)
    path = _write(tmp_path / "t.csv", ["a", "label"], np.column_stack([rng.normal(size=1000), y]).tolist())
    d = load_tabular_csv(path, "label", balance="undersample")
    _, counts = np.unique(d.targets, return_counts=True)
    assert counts[0] == counts[1] == y.sum()


def test_minority_file_gives_6016_rows(tmp_path):
    # 3,008 positives making up 4% of the file
    n_pos = 3008
    n = n_pos * 25
    y = np.zeros(n, dtype=int)
    y[np.random.default_rng(2).choice(n, n_pos, replace=False)] = 1
    x = np.random.default_rng(3).normal(size=(n, 3)).round(3)
    path = _write(tmp_path / "bank.csv", ["f0", "f1", "f2", "target"], np.column_stack([x, y]).tolist())
    d = load_tabular_csv(path, "target", balance="undersample")
    assert d.n_samples == 6016
    assert (d.targets == 1).sum() == (d.targets == 0).sum() == 3008


def test_ingest_reproducible(tmp_path):
    rng = np.random.default_rng(4)
    rows = np.column_stack([rng.normal(size=200), (rng.random(200) < 0.3).astype(int)])
    path = _write(tmp_path / "t.csv", ["a", "label"], rows.tolist())
    a = load_tabular_csv(path, "label", balance="undersample", seed=9)
    b = load_tabular_csv(path, "label", balance="undersample", seed=9)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.is_train, b.is_train)


def test_attribution_dump(tmp_path):
    path = write_attribution_dump(tmp_path / "a.csv", {"sa": np.array([[1.0, -2.0], [0.5, 0.0]])},
                                  sample_ids=[10, 11])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["sample_id", "method", "feature_index", "value"]
    assert rows[1:] == [["10", "sa", "0", "1.0"], ["10", "sa", "1", "-2.0"],
                        ["11", "sa", "0", "0.5"], ["11", "sa", "1", "0.0"]]
