import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbmdarwin import (
    GaussianState,
    Model,
    RedundancyTrace,
    f_delta,
    mutual_info_curve,
    mutual_information,
    non_monotonicity_Nf,
    redundancy_trace,
    sample_fragments,
    von_neumann_entropy,
)
from qbmdarwin.darwinism import _first_crossing, fragment_size
from qbmdarwin.errors import ConfigurationError, InvalidSubsetError


@pytest.fixture(scope="module")
def record_model():
    """Coupled model whose records form within a few tens of time units."""
    return Model.build(0.45, squeezing_r=3.0, n_osc=40, kappa=0.05)


class FakeBank:
    """Stand-in with a prescribed averaged curve, for the search rule."""

    def __init__(self, grid, values):
        self.table = dict(zip(np.round(grid, 12), values))
        self.calls = 0

    def stats(self, f):
        self.calls += 1
        return self.table[round(f, 12)], 0.0, 1


class TestMutualInformation:
    def test_product_state_zero(self, record_model):
        state = record_model.state_at(0.0)
        assert mutual_information(state, [1, 2, 3]) == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("t", [5.0, 30.0, 80.0])
    def test_whole_bath_is_twice_hs(self, record_model, t):
        state = record_model.state_at(t)
        whole = list(range(1, record_model.n_modes))
        h_s = mutual_information(state, whole) / 2.0
        sys_only = GaussianState(np.zeros(2), factor=state.factor[:2])
        assert h_s == pytest.approx(von_neumann_entropy(sys_only), abs=1e-8)

    def test_dense_and_factor_agree(self, record_model):
        state = record_model.state_at(20.0)
        dense = GaussianState(state.mean, state.cov)
        frag = [2, 7, 11, 30]
        assert mutual_information(state, frag) == pytest.approx(mutual_information(dense, frag), abs=1e-7)

    def test_pure_shortcut_matches(self, record_model):
        state = record_model.state_at(25.0)
        frag = list(range(1, 31))
        assert mutual_information(state, frag, pure=True) == pytest.approx(
            mutual_information(state, frag), abs=1e-8
        )

    def test_rejects_system(self, record_model):
        with pytest.raises(InvalidSubsetError):
            mutual_information(record_model.state_at(1.0), [0, 1])

    def test_empty_fragment(self, record_model):
        assert mutual_information(record_model.state_at(4.0), []) == 0.0

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), t=st.floats(1.0, 100.0))
    def test_nested_monotone(self, record_model, seed, t):
        rng = np.random.default_rng(seed)
        state = record_model.state_at(t)
        order = rng.permutation(np.arange(1, record_model.n_modes))
        a, b = sorted(rng.choice(np.arange(1, 40), size=2, replace=False))
        assert mutual_information(state, order[:a]) <= mutual_information(state, order[:b]) + 1e-9


class TestSampling:
    def test_whole_bath(self):
        out = sample_fragments(300, 1.0, 25, 0)
        assert len(out) == 1
        assert out[0].fragment.indices == tuple(range(1, 301))

    def test_half(self):
        out = sample_fragments(300, 0.5, 5, 3)
        assert all(len(s.fragment) == 150 for s in out)
        assert all(min(s.fragment.indices) >= 1 for s in out)

    def test_deterministic(self):
        a = sample_fragments(300, 0.3, 10, 7)
        b = sample_fragments(300, 0.3, 10, 7)
        assert [s.fragment for s in a] == [s.fragment for s in b]
        assert [s.fragment for s in a] != [s.fragment for s in sample_fragments(300, 0.3, 10, 8)]

    def test_nested_across_fractions(self):
        small = sample_fragments(100, 0.2, 4, 1)
        big = sample_fragments(100, 0.6, 4, 1)
        for s, b in zip(small, big):
            assert set(s.fragment) <= set(b.fragment)

    @pytest.mark.parametrize("fraction", [0.0, -0.1, 1.5])
    def test_invalid_fraction(self, fraction):
        with pytest.raises(ConfigurationError):
            sample_fragments(10, fraction, 3)

    @given(n=st.integers(1, 500), f=st.floats(0.001, 1.0))
    def test_size_bounds(self, n, f):
        size = fragment_size(n, f)
        assert 1 <= size <= n
        assert abs(size - f * n) <= 0.5 + 1e-6 or size == 1


class TestCurve:
    def test_uncoupled(self):
        model = Model.build(0.45, squeezing_r=3.0, n_osc=20, kappa=0.0)
        curve = mutual_info_curve(model, 30.0, [0.2, 0.5, 0.9], n_samples=5)
        np.testing.assert_allclose(curve.mi_mean, 0.0, atol=1e-9)

    def test_shape(self, record_model):
        grid = [0.1, 0.25, 0.5, 0.75, 1.0]
        curve = mutual_info_curve(record_model, 40.0, grid, n_samples=6, master_seed=2)
        assert curve.mi_mean.shape == (5,)
        assert np.all(np.diff(curve.mi_mean) >= -1e-9)
        assert curve.mi_mean[-1] == pytest.approx(2.0 * curve.h_system, abs=1e-8)
        assert curve.mi_stderr[-1] == 0.0

    def test_bad_grid(self, record_model):
        with pytest.raises(ConfigurationError):
            mutual_info_curve(record_model, 1.0, [0.5, 0.3])
        with pytest.raises(ConfigurationError):
            mutual_info_curve(record_model, 1.0, [])


class TestFDelta:
    def test_t_zero_is_one(self, record_model):
        assert f_delta(record_model, 0.0) == 1.0

    def test_first_grid_point_at_or_above(self):
        grid = np.round(np.arange(1, 21) * 0.05, 12)
        values = np.r_[0.80, 0.97, np.linspace(1.0, 2.0, 18)]
        bank = FakeBank(grid, values)
        # threshold 0.95 lies between the 0.05 and 0.10 values
        assert grid[_first_crossing(bank, grid, 0.95, hint=10)] == 0.10

    @settings(max_examples=100)
    @given(
        steps=st.lists(st.floats(0.0, 0.3), min_size=2, max_size=40),
        thr=st.floats(0.0, 5.0),
        hint=st.integers(0, 60),
    )
    def test_search_equals_linear_scan(self, steps, thr, hint):
        values = np.cumsum(steps)
        grid = np.round(np.linspace(0.02, 1.0, len(values)), 12)
        bank = FakeBank(grid, values)
        hits = np.flatnonzero(values >= thr)
        expected = int(hits[0]) if hits.size else None
        assert _first_crossing(bank, grid, thr, hint) == expected

    def test_matches_bruteforce(self, record_model):
        grid = np.round(np.arange(1, 21) * 0.05, 12)
        t = 60.0
        got = f_delta(record_model, t, 0.05, grid, n_samples=5, master_seed=4)
        curve = mutual_info_curve(record_model, t, grid, n_samples=5, master_seed=4)
        hits = np.flatnonzero(curve.mi_mean >= 0.95 * curve.h_system)
        assert got == (grid[hits[0]] if hits.size else 1.0)

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.2])
    def test_bad_delta(self, record_model, delta):
        with pytest.raises(ConfigurationError):
            f_delta(record_model, 10.0, delta)

    def test_empty_grid(self, record_model):
        with pytest.raises(ConfigurationError):
            f_delta(record_model, 10.0, 0.05, [])

    def test_trace_agrees_with_pointwise(self, record_model):
        times = [0.0, 20.0, 60.0]
        grid = np.round(np.arange(1, 11) * 0.1, 12)
        trace = redundancy_trace(record_model, times, 0.1, grid, n_samples=4, master_seed=1)
        pointwise = [f_delta(record_model, t, 0.1, grid, 4, 1) for t in times]
        np.testing.assert_array_equal(trace.f_delta, pointwise)
        np.testing.assert_allclose(trace.r_delta, 1.0 / trace.f_delta)
        assert trace.f_delta[0] == 1.0


class TestNonMonotonicity:
    def test_monotone_decreasing(self):
        assert non_monotonicity_Nf([0.9, 0.5, 0.5, 0.2]) == 0.0

    def test_example(self):
        assert non_monotonicity_Nf([0.5, 0.4, 0.45, 0.3]) == pytest.approx(0.05, abs=1e-12)

    def test_trace_input(self):
        trace = RedundancyTrace.from_values(0.05, [0, 1, 2], [1.0, 0.3, 0.5])
        assert non_monotonicity_Nf(trace) == pytest.approx(0.2)

    def test_too_short(self):
        with pytest.raises(ConfigurationError):
            non_monotonicity_Nf([0.5])

    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=50))
    def test_nonnegative_and_bounded(self, values):
        nf = non_monotonicity_Nf(values)
        assert nf >= 0.0
        assert nf <= np.sum(np.abs(np.diff(values))) + 1e-12
