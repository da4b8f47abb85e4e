import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from diffhist.core import BinSpec, Normalization, SampleBatch, ValidationError, make_uniform_bins
from diffhist.kernels import (Kernel, KernelKind, KernelParams, default_params, histlayer_vote,
                              kde_vote, lbf_vote, make_kernel, ordered_sum, rbf_vote,
                              soft_histogram, threshold_phi, vote, vote_matrix)
from diffhist.oracle import BoundaryMode, hard_histogram, normalize

# mpmath, 30 digits
B005 = 1.00049764032454050709736278195       # 1.01 ** 0.05
B0025 = 1.00024878921423369403922702789      # 1.01 ** 0.025
LN_B0025 = 0.00995280638816240781796577409222  # ln(1.01) * 1.01 ** 0.025
SIG5_MINUS_HALF = 0.493307149075715144440638019619
TWO_SIG_25_MINUS_1 = 0.848283639957512897613387646707

ALL_KINDS = list(KernelKind)


def test_threshold_phi():
    assert threshold_phi(1.0004) == 1.0004
    assert threshold_phi(1.0) == 0.0
    assert threshold_phi(0.97) == 0.0
    np.testing.assert_array_equal(threshold_phi([0.5, 1.0, 2.0]), [0.0, 0.0, 2.0])


class TestHistLayer:
    def test_center(self):
        v = histlayer_vote(0.3, 0.3, 0.05)
        assert v.value == pytest.approx(B005, rel=1e-15)
        assert v.d_dx == 0.0 and v.d_dmu == 0.0

    def test_boundary_is_zero(self):
        # 0.25 + 0.25 is exact, so x sits precisely on the edge
        v = histlayer_vote(0.5, 0.25, 0.25)
        assert v.value == 0.0
        assert (v.d_dx, v.d_dmu, v.d_domega, v.d_dparam) == (0.0, 0.0, 0.0, 0.0)

    def test_outside(self):
        v = histlayer_vote(0.5 + 0.5, 0.5, 0.25)
        assert (v.value, v.d_dx, v.d_dmu, v.d_domega, v.d_dparam) == (0.0,) * 5

    def test_half_way(self):
        v = histlayer_vote(0.025, 0.0, 0.05)
        assert v.value == pytest.approx(B0025, rel=1e-15)
        assert v.d_dx == pytest.approx(-LN_B0025, rel=1e-13)
        fd = (histlayer_vote(0.025 + 1e-7, 0.0, 0.05).value
              - histlayer_vote(0.025 - 1e-7, 0.0, 0.05).value) / 2e-7
        assert v.d_dx == pytest.approx(fd, rel=1e-6)

    def test_partials_formula(self):
        x, mu, w, b = -0.31, -0.3, 0.05, 1.2
        v = histlayer_vote(x, mu, w, b)
        room = w - abs(x - mu)
        assert v.value == pytest.approx(b ** room, rel=1e-15)
        assert v.d_dx == pytest.approx(math.log(b) * v.value, rel=1e-14)   # x left of center
        assert v.d_domega == pytest.approx(math.log(b) * v.value, rel=1e-14)
        assert v.d_dparam == pytest.approx(v.value * room / b, rel=1e-14)

    @given(st.floats(-3, 3), st.floats(-2, 2), st.floats(1e-3, 1), st.floats(1.0001, 3))
    def test_vote_range(self, x, mu, w, b):
        v = histlayer_vote(x, mu, w, b).value
        assert v == 0.0 or 1.0 < v <= b ** w * (1 + 1e-15)
        if abs(x - mu) >= w:
            assert v == 0.0


class TestLBF:
    def test_examples(self):
        assert lbf_vote(0.2, 0.2, 10.0).value == 1.0
        assert lbf_vote(0.25, 0.0, 4.0).value == 0.0
        v = lbf_vote(0.05, 0.0, 10.0)
        assert v.value == pytest.approx(0.5, abs=1e-15)
        assert v.d_dx == -10.0
        assert v.d_dparam == pytest.approx(-0.05)

    def test_zero_outside_support(self):
        v = lbf_vote(1.0, 0.0, 4.0)
        assert (v.value, v.d_dx, v.d_dparam) == (0.0, 0.0, 0.0)


class TestRBF:
    def test_peak(self):
        assert rbf_vote(0.7, 0.7, 13.0).value == 1.0

    def test_half_max_at_edge(self):
        w = 0.05
        gamma = math.sqrt(math.log(2)) / w
        assert rbf_vote(0.3 + w, 0.3, gamma).value == pytest.approx(0.5, rel=1e-12)

    def test_decay(self):
        v = rbf_vote(1e3, 0.0, 16.0)
        assert (v.value, v.d_dx, v.d_dparam) == (0.0, 0.0, 0.0)


class TestKDE:
    def test_center(self):
        v = kde_vote(0.1, 0.1, 0.05, 0.02)
        assert v.value == pytest.approx(TWO_SIG_25_MINUS_1, rel=1e-14)
        assert v.d_dx == 0.0

    def test_small_bandwidth_recovers_hard_binning(self):
        for B in (1e-3, 1e-4, 1e-6):
            assert kde_vote(0.03, 0.0, 0.05, B).value == pytest.approx(1.0, abs=1e-8)
            assert kde_vote(0.07, 0.0, 0.05, B).value == pytest.approx(0.0, abs=1e-8)

    def test_edge_value(self):
        v = kde_vote(0.05, 0.0, 0.05, 0.02)
        assert v.value == pytest.approx(SIG5_MINUS_HALF, rel=1e-14)

    @pytest.mark.parametrize("d", [-2.0, -0.7, 0.7, 2.0, 5.0])
    def test_tails_keep_relative_precision(self, d):
        with mpmath.workdps(40):
            s = lambda u: 1 / (1 + mpmath.exp(-u))
            exact = float(s((mpmath.mpf(d) + mpmath.mpf(0.05)) / mpmath.mpf(0.02))
                          - s((mpmath.mpf(d) - mpmath.mpf(0.05)) / mpmath.mpf(0.02)))
        assert kde_vote(d, 0.0, 0.05, 0.02).value == pytest.approx(exact, rel=1e-12)


params_for = {
    KernelKind.HISTLAYER: 1.01, KernelKind.LBF: 20.0, KernelKind.RBF: 16.65, KernelKind.KDE: 0.02,
}


@pytest.mark.parametrize("kind", ALL_KINDS)
@given(x=st.floats(-2, 2), mu=st.floats(-1, 1), w=st.floats(0.01, 0.5))
def test_mu_derivative_mirrors_x(kind, x, mu, w):
    v = vote(kind, x, mu, w, params_for[kind])
    assert abs(v.d_dmu + v.d_dx) <= 1e-12


def test_default_params(grid20):
    assert default_params("histlayer", grid20).base == 1.01
    assert default_params("kde", grid20).bandwidth == pytest.approx(0.02, rel=1e-15)
    slopes = default_params("lbf", grid20).slopes
    np.testing.assert_allclose(slopes, 20.0, rtol=1e-14)
    gammas = default_params("rbf", grid20).gammas
    np.testing.assert_allclose(gammas, math.sqrt(math.log(2)) / 0.05, rtol=1e-14)
    with pytest.raises(ValidationError):
        default_params("kde", BinSpec([0.0, 1.0], [0.1, 0.3]))


def test_kernel_param_validation(grid20):
    with pytest.raises(ValidationError):
        Kernel(KernelKind.HISTLAYER, KernelParams(base=1.0)).param_array(grid20)
    with pytest.raises(ValidationError):
        Kernel(KernelKind.KDE, KernelParams()).param_array(grid20)
    with pytest.raises(ValidationError):
        Kernel(KernelKind.LBF, KernelParams(slopes=(1.0, 2.0))).param_array(grid20)
    with pytest.raises(ValidationError):
        make_kernel("rbf", grid20, gamma=-1.0)
    assert make_kernel("kde", grid20, bandwidth=0.005).params.bandwidth == 0.005
    # overrides for other kinds are ignored
    assert make_kernel("lbf", grid20, base=1.5).params.slopes is not None


class TestSoftHistogram:
    def test_empty(self, grid20):
        for kind in ALL_KINDS:
            h = soft_histogram(SampleBatch([]), grid20, make_kernel(kind, grid20), "probability")
            assert h.values.tolist() == [0.0] * 20

    def test_single_sample_at_center(self, grid20):
        x = grid20.centers[4]
        h = soft_histogram(SampleBatch([x]), grid20, make_kernel("histlayer", grid20))
        expected = np.zeros(20)
        expected[4] = B005
        np.testing.assert_allclose(h.values, expected, rtol=1e-15, atol=0)

    def test_probability_sandwich(self, grid20, normal_10k):
        h = soft_histogram(normal_10k, grid20, make_kernel("histlayer", grid20), "probability")
        c = normalize(hard_histogram(normal_10k, grid20, BoundaryMode.OPEN_INTERVAL),
                      "probability").values
        assert np.all(c <= h.values)
        assert np.all(h.values <= c * B005 * (1 + 1e-12))

    def test_gradient_records(self, grid20):
        x = np.array([-0.93, -0.2, 0.01, 0.44, 0.9])
        kernel = make_kernel("kde", grid20)
        h, g = soft_histogram(x, grid20, kernel, "probability", with_grad=True)
        votes = vote_matrix(x, grid20, kernel)
        np.testing.assert_array_equal(g.d_dx, votes.d_dx / 5)
        np.testing.assert_allclose(g.d_dmu, votes.d_dmu.sum(axis=0) / 5, rtol=1e-15)
        np.testing.assert_allclose(g.d_domega, votes.d_domega.sum(axis=0) / 5, rtol=1e-15)
        # dh/dx_i against a central difference of the whole histogram
        for i in range(x.size):
            up, dn = x.copy(), x.copy()
            up[i] += 1e-6
            dn[i] -= 1e-6
            fd = (soft_histogram(up, grid20, kernel, "probability").values
                  - soft_histogram(dn, grid20, kernel, "probability").values) / 2e-6
            np.testing.assert_allclose(g.d_dx[i], fd, rtol=1e-5, atol=1e-9)

    def test_ordered_sum_is_sequential(self):
        m = np.random.default_rng(1).standard_normal((5000, 20))
        acc = np.zeros(20)
        for row in m:
            acc = acc + row
        assert np.array_equal(ordered_sum(m), acc)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_deterministic(self, kind, grid20, normal_10k):
        k = make_kernel(kind, grid20)
        a = soft_histogram(normal_10k, grid20, k).values
        b = soft_histogram(SampleBatch(normal_10k.values.copy()), grid20, k).values
        assert a.tobytes() == b.tobytes()


@settings(max_examples=60)
@given(st.floats(-1, 1), st.integers(2, 40), st.floats(0.05, 5))
def test_lbf_partition_of_unity(lo, k, span):
    bins = make_uniform_bins(lo, lo + span, k)
    xs = np.linspace(bins.centers[0], bins.centers[-1], 97)
    total = lbf_vote(xs[:, None], bins.centers[None, :], 1.0 / (2 * bins.half_widths[None, :])).value.sum(axis=1)
    assert np.max(np.abs(total - 1.0)) <= 1e-12


@pytest.mark.parametrize("kind", ALL_KINDS)
@settings(max_examples=40, deadline=None)
@given(delta=st.sampled_from([0.5, -0.25, 0.125, 2.0, -1.0, 0.3, -0.77]),
       xs=st.lists(st.floats(-1.4, 1.4), min_size=1, max_size=50))
def test_translation_invariance(kind, delta, xs):
    bins = make_uniform_bins(-1, 1, 20)
    moved = BinSpec(bins.centers + delta, bins.half_widths)
    x = np.asarray(xs)
    # the shift rounds x - mu by an ulp; keep clear of kinks where an ulp flips a vote
    kinks = np.concatenate([bins.edges(), bins.centers])
    x = x[np.min(np.abs(x[:, None] - kinks[None, :]), axis=1) > 1e-9]
    assume(x.size > 0)
    k = make_kernel(kind, bins)
    a = soft_histogram(x, bins, k).values
    b = soft_histogram(x + delta, moved, k).values
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
