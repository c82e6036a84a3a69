"""Property-based checks: equivariance, shrinkage bounds and conservation laws."""

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from grouplinear import Dataset, get_estimator, group_linear, spherical_shrink, sure_grand_mean
from grouplinear.binning import bins_dynamic, bins_equal_log
from grouplinear.dataio import BattingRecord, hypergeometric_shuffle
from grouplinear.methods import METHOD_NAMES

REL = 1e-10

xs = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
vs = st.floats(0.01, 100, allow_nan=False, allow_infinity=False)


@st.composite
def datasets(draw, min_size=2, max_size=40):
    n = draw(st.integers(min_size, max_size))
    x = draw(st.lists(xs, min_size=n, max_size=n))
    v = draw(st.lists(vs, min_size=n, max_size=n))
    return Dataset(x, v)


def scale_of(data, extra=0.0):
    return max(float(np.max(np.abs(data.x))), float(np.sqrt(np.max(data.v))), abs(extra), 1e-300)


def assert_close(got, want, scale):
    np.testing.assert_allclose(got, want, rtol=0, atol=REL * scale)


methods = st.sampled_from(METHOD_NAMES)


@settings(max_examples=60, deadline=None)
@given(datasets(), st.floats(-1000, 1000), methods)
def test_translation_equivariance(data, t, method):
    fn = get_estimator(method)
    shifted = Dataset(data.x + t, data.v)
    assert_close(fn(shifted).estimates, fn(data).estimates + t, scale_of(data, t))


def same_structure(a, b):
    """Scaling keeps the v order, the tie pattern and both partitions' memberships."""
    oa, ob = np.argsort(a.v, kind="stable"), np.argsort(b.v, kind="stable")
    if not np.array_equal(oa, ob) or not np.array_equal(np.diff(a.v[oa]) == 0, np.diff(b.v[ob]) == 0):
        return False
    for build in (bins_equal_log, bins_dynamic):
        pa, pb = build(a), build(b)
        if len(pa.membership) != len(pb.membership) or any(
                not np.array_equal(i, j) for i, j in zip(pa.membership, pb.membership)):
            return False
    return True


# powers of two rescale every float exactly; other factors can round two
# nearby variances into a tie or move one across a bin edge, so those draws
# are kept only when the grouping structure survives the rescaling
scales = st.one_of(st.integers(-6, 6).map(lambda k: 2.0 ** k), st.floats(0.05, 20))


@settings(max_examples=60, deadline=None)
@given(datasets(), scales, methods)
def test_scale_equivariance(data, s, method):
    fn = get_estimator(method)
    scaled = Dataset(data.x * s, data.v * s * s)
    assume(same_structure(data, scaled))
    assert_close(fn(scaled).estimates, s * fn(data).estimates, s * scale_of(data))


@settings(max_examples=60, deadline=None)
@given(datasets(), st.randoms(use_true_random=False), methods)
def test_permutation_equivariance(data, rnd, method):
    perm = list(range(data.n))
    rnd.shuffle(perm)
    perm = np.array(perm)
    fn = get_estimator(method)
    assert_close(fn(data.subset(perm)).estimates, fn(data).estimates[perm], scale_of(data))


@settings(max_examples=60, deadline=None)
@given(datasets(), st.randoms(use_true_random=False))
def test_group_linear_permutation_with_fixed_partition(data, rnd):
    part = bins_equal_log(data)
    perm = list(range(data.n))
    rnd.shuffle(perm)
    perm = np.array(perm)
    got = group_linear(data.subset(perm), part).estimates
    assert_close(got, group_linear(data, part).estimates[perm], scale_of(data))


@settings(max_examples=100, deadline=None)
@given(datasets(min_size=1))
def test_group_linear_convex_combination(data):
    for part in (bins_equal_log(data), bins_dynamic(data)):
        res = group_linear(data, part)
        assert np.all((res.shrinkage >= 0) & (res.shrinkage <= 1))
        for stats in res.block_diagnostics:
            idx = res.blocks == stats.block
            tol = REL * scale_of(data)
            lo = np.minimum(data.x[idx], stats.x_bar) - tol
            hi = np.maximum(data.x[idx], stats.x_bar) + tol
            assert np.all((res.estimates[idx] >= lo) & (res.estimates[idx] <= hi))
            assert 0 <= stats.c <= 1 and 0 <= stats.b_hat <= 1 and stats.s_sq >= 0


@settings(max_examples=100, deadline=None)
@given(datasets(min_size=1), st.floats(0, 2))
def test_spherical_convex_combination(data, c):
    res = spherical_shrink(data, c)
    xbar = float(np.mean(data.x))
    tol = REL * scale_of(data)
    assert np.all(res.estimates >= np.minimum(data.x, xbar) - tol)
    assert np.all(res.estimates <= np.maximum(data.x, xbar) + tol)


@settings(max_examples=100, deadline=None)
@given(datasets())
def test_sure_grand_mean_monotone_factors(data):
    b = sure_grand_mean(data).shrinkage
    order = np.argsort(data.v, kind="stable")
    assert np.all(np.diff(b[order]) >= 0)
    assert np.all((b >= 0) & (b <= 1))


@settings(max_examples=100, deadline=None)
@given(datasets(min_size=1))
def test_partitions_cover_their_data(data):
    for part in (bins_equal_log(data), bins_dynamic(data)):
        part.validate()
        labels = part.assign_many(data.v)
        assert np.all(labels >= 0)
        assert sorted(np.concatenate(part.membership).tolist()) == list(range(data.n))


@st.composite
def records(draw):
    n1 = draw(st.integers(0, 600))
    n2 = draw(st.integers(0, 600))
    h1 = draw(st.integers(0, n1))
    h2 = draw(st.integers(0, n2))
    return BattingRecord("r", h1, n1, h2, n2, draw(st.booleans()))


@settings(max_examples=200, deadline=None)
@given(records(), st.integers(0, 2**32 - 1))
def test_shuffle_conservation(rec, seed):
    out = hypergeometric_shuffle(rec, seed)
    assert out.h1 + out.h2 == rec.h1 + rec.h2
    assert (out.n1, out.n2) == (rec.n1, rec.n2)
    assert 0 <= out.h1 <= out.n1 and 0 <= out.h2 <= out.n2
    assert out == hypergeometric_shuffle(rec, seed)


@settings(max_examples=50, deadline=None)
@given(datasets(min_size=4))
def test_tied_variances_stay_together_in_dynamic_bins(data):
    assume(np.unique(data.v).size < data.n)
    labels = bins_dynamic(data).assign_many(data.v)
    for level in np.unique(data.v):
        assert np.unique(labels[data.v == level]).size == 1
