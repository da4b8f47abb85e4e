import numpy as np
import pytest

from diffhist.core import SampleBatch, make_uniform_bins
from diffhist.kernels import make_kernel, soft_histogram
from diffhist.pipeline import (STAGE_ORDER, StageKind, build_pipeline,
                               pipeline_equivalence_check, run_pipeline, trace)

B = 1.01


def test_stage_order_and_affine_maps(grid20):
    stages = build_pipeline(grid20, B)
    assert [s.kind for s in stages] == list(STAGE_ORDER)
    shift, negate = stages[0], stages[2]
    assert np.all(shift.weight == 1.0) and np.array_equal(shift.bias, -grid20.centers)
    assert np.all(negate.weight == -1.0) and np.array_equal(negate.bias, grid20.half_widths)


def test_trace_at_center():
    bins = make_uniform_bins(-1, 1, 20)
    x = bins.centers[2]
    out = trace(build_pipeline(bins, B), [x])
    w = bins.half_widths[2]
    expected = [0.0, 0.0, w, B ** w, B ** w, B ** w]
    got = [o[0, 2] if o.ndim == 2 else o[2] for o in out]
    assert got == pytest.approx(expected, rel=1e-15, abs=0)


def test_edge_sample():
    bins = make_uniform_bins(0.0, 1.0, 2)   # edges 0, 0.5, 1 are exact
    out = trace(build_pipeline(bins, B), [0.5])
    assert out[3][0, 0] == 1.0 and out[3][0, 1] == 1.0
    assert out[4][0].tolist() == [0.0, 0.0]


def test_empty():
    bins = make_uniform_bins(-1, 1, 20)
    assert run_pipeline(build_pipeline(bins), []).tolist() == [0.0] * 20
    assert pipeline_equivalence_check(SampleBatch([]), bins) == 0.0


def test_single_center_exact(grid20):
    assert pipeline_equivalence_check(SampleBatch([grid20.centers[7]]), grid20) == 0.0


def test_average_pool(grid20, normal_10k):
    avg = run_pipeline(build_pipeline(grid20, B, average=True), normal_10k.values)
    direct = soft_histogram(normal_10k, grid20, make_kernel("histlayer", grid20), "probability")
    np.testing.assert_array_equal(avg, direct.values)


def test_equivalence_bitwise(grid20, normal_10k):
    staged = run_pipeline(build_pipeline(grid20, B), normal_10k.values)
    direct = soft_histogram(normal_10k, grid20, make_kernel("histlayer", grid20))
    assert staged.tobytes() == direct.values.tobytes()
    assert pipeline_equivalence_check(normal_10k, grid20, B) == 0.0


def test_stagewise_monotonicity(grid20, normal_10k):
    out = trace(build_pipeline(grid20, B), normal_10k.values[:2000])
    inside = np.abs(normal_10k.values[:2000, None] - grid20.centers) < grid20.half_widths
    assert np.array_equal(out[3] > 1.0, out[2] > 0.0)
    assert np.array_equal(out[2] > 0.0, inside)


def test_out_of_order_rejected(grid20):
    stages = build_pipeline(grid20)
    with pytest.raises(ValueError):
        trace(stages[::-1], [0.0])
