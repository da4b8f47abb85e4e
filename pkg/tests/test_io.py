import json
import os

import numpy as np
import pytest

from diffhist import io as dio
from diffhist.core import HistogramVector, SampleBatch, ValidationError, make_uniform_bins
from diffhist.kernels import make_kernel, soft_histogram


def test_parse_examples():
    assert dio.parse_samples("0.1\n0.2\n").values.tolist() == [0.1, 0.2]
    assert dio.parse_samples("# {}\n\n1e-3\n  -2 \n").values.tolist() == [0.001, -2.0]
    assert len(dio.parse_samples("")) == 0


def test_malformed_line_is_cited():
    with pytest.raises(ValidationError, match="line 3"):
        dio.parse_samples("0.1\n0.2\nabc\n")
    with pytest.raises(ValidationError, match="line 2"):
        dio.parse_samples("0.1\nnan\n")
    with pytest.raises(ValidationError, match="line 2"):
        dio.parse_samples("0.1\n# late header\n")


def test_samples_round_trip(tmp_path):
    x = SampleBatch(np.random.default_rng(0).standard_normal(500))
    path = tmp_path / "s.txt"
    dio.write_samples(x, str(path), header={"seed": 1})
    assert dio.read_samples(str(path)).values.tobytes() == x.values.tobytes()
    assert dio.read_config_document(str(path)) == {"seed": 1}


def test_histogram_round_trip(tmp_path, grid20, normal_10k):
    h = soft_histogram(normal_10k, grid20, make_kernel("kde", grid20), "probability")
    path = str(tmp_path / "h.json")
    dio.write_histogram(h, grid20, path, config={"k": 1})
    doc = json.loads(open(path).read())
    assert set(doc) == {"bins", "values", "normalization", "kernel", "n_samples", "config"}
    assert set(doc["bins"]) == {"centers", "half_widths"}
    back, bins, cfg = dio.read_histogram(path)
    assert bins == grid20 and cfg == {"k": 1} and back.n_samples == 10_000
    np.testing.assert_allclose(back.values, h.values, rtol=0, atol=1e-15)
    assert back.meta["kernel"] == "kde"


def test_histogram_shape_mismatch(tmp_path):
    path = tmp_path / "bad.json"
    doc = dio.histogram_document(HistogramVector([1.0, 2.0], "counts", 3), make_uniform_bins(0, 1, 2), "hard")
    doc["values"] = [1.0]
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        dio.read_histogram(str(path))
    path.write_text("{not json")
    with pytest.raises(ValidationError, match="line 1"):
        dio.read_histogram(str(path))


def test_failed_write_leaves_nothing(tmp_path):
    target = tmp_path / "out.json"
    target.write_text("old")
    with pytest.raises(ValueError):
        dio.write_json({"x": float("nan")}, str(target))
    assert target.read_text() == "old"
    assert os.listdir(tmp_path) == ["out.json"]
