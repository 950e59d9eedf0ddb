import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrls import (
    FilterParams,
    MRls,
    Rls,
    bpsk_stream,
    herm_dot,
    layer_select,
    make_rng,
    pi_update,
    regressor_matrix,
)


def _params(**kw):
    base = dict(n_taps=8, lam=0.99, noise_variance=0.01)
    base.update(kw)
    return FilterParams(**base)


class TestFilterParams:
    def test_threshold_ladder(self):
        fp = FilterParams(n_taps=50, lam=0.99, l_max=5, noise_variance=0.01)
        np.testing.assert_allclose(
            fp.r_thresholds, [0.01, 0.005, 0.0025, 0.00125, 0.000625], rtol=1e-12
        )

    def test_degenerate_unit_eps_m(self):
        # eps M = 1 collapses every threshold to zero; allowed, no special case
        fp = FilterParams(n_taps=50, lam=0.98, l_max=3, noise_variance=0.01)
        np.testing.assert_allclose(fp.r_thresholds, np.zeros(3), atol=1e-15)

    def test_stability_warning_low_lambda(self):
        with pytest.warns(UserWarning, match="stable tracking range"):
            FilterParams(n_taps=50, lam=0.95)

    def test_stability_warning_unit_lambda(self):
        with pytest.warns(UserWarning, match="stable tracking range"):
            FilterParams(n_taps=50, lam=1.0)

    def test_no_warning_in_stable_range(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            FilterParams(n_taps=50, lam=0.99)

    def test_validation(self):
        with pytest.raises(ValueError):
            FilterParams(n_taps=8, lam=0.0)
        with pytest.raises(ValueError):
            FilterParams(n_taps=8, lam=0.99, delta=0.0)
        with pytest.raises(ValueError):
            FilterParams(n_taps=8, lam=0.99, z=0.0)
        with pytest.raises(ValueError):
            FilterParams(n_taps=8, lam=0.99, l_max=0)


class TestPiUpdate:
    def test_hand_value(self):
        assert pi_update(0.1, 2.0 + 0j, 0.25) == pytest.approx(0.75 * 0.1 + 0.25 * 4.0)

    def test_fixed_point_at_constant_power(self):
        pi = 4.0
        for _ in range(10):
            pi = pi_update(pi, 2.0, 0.5)
        assert pi == pytest.approx(4.0)


class TestLayerSelect:
    def test_worked_example(self):
        pi = np.array([0.05, 0.02, 0.03])
        r = np.array([0.01, 0.005, 0.0025])
        assert layer_select(pi, r, 100.0) == 2

    def test_large_init_still_picks_first_layer(self):
        assert layer_select(np.array([1.0]), np.array([0.0]), 100.0) == 1

    def test_first_minimum_wins_on_ties(self):
        # dyadic values so the differences are exact ties in binary float
        pi = np.array([0.25, 0.375, 0.5])
        r = np.array([0.125, 0.25, 0.375])
        # J = (0.125, 0.125, 0.125): strict improvement required, so depth 1
        assert layer_select(pi, r, 100.0) == 1

    def test_nothing_beats_init(self):
        assert layer_select(np.array([5.0, 6.0]), np.array([0.0, 0.0]), 1.0) == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            layer_select(np.array([]), np.array([]), 1.0)

    @given(
        st.integers(1, 6).flatmap(
            lambda n: st.tuples(
                st.lists(st.floats(0, 10), min_size=n, max_size=n),
                st.lists(st.floats(0, 10), min_size=n, max_size=n),
                st.floats(0.01, 100),
                st.floats(1e-3, 1e3),
            )
        )
    )
    @settings(max_examples=80, deadline=None)
    def test_scale_invariance(self, case):
        pi, r, j_init, scale = case
        pi, r = np.array(pi), np.array(r)
        assert layer_select(pi * scale, r * scale, j_init * scale) == layer_select(pi, r, j_init)


def _run_pair(n_samples=300, m=8, seed=0, l_max=1):
    rng = make_rng(seed)
    stream = bpsk_stream(rng, n_samples)
    x = regressor_matrix(stream, m)
    h = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2 * m)
    w = (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)) * 0.05
    d = x @ np.conj(h) + w
    return x, d


class TestRls:
    def test_noiseless_convergence(self):
        # static channel, no noise: estimate converges to machine-level
        m = 50
        rng = make_rng(1)
        stream = bpsk_stream(rng, 50 * m)
        x = regressor_matrix(stream, m)
        h = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2 * m)
        est = Rls(FilterParams(n_taps=m, lam=0.99))
        for n in range(50 * m):
            est.step(x[n], herm_dot(h, x[n]))
        assert np.linalg.norm(h - est.h_hat) < 1e-6

    def test_apriori_error_definition(self):
        x, d = _run_pair()
        est = Rls(_params())
        before = est.h_hat.copy()
        _, e = est.step(x[10], d[10])
        assert e == pytest.approx(d[10] - herm_dot(before, x[10]))


class TestMRls:
    def test_single_layer_collapses_to_rls_bitwise(self):
        x, d = _run_pair(seed=5)
        fp = _params(l_max=1)
        plain = Rls(fp)
        stack = MRls(fp)
        for n in range(len(d)):
            h_plain, e = plain.step(x[n], d[n])
            h_tilde, l_opt, _ = stack.step(x[n], d[n])
            assert l_opt == 1
            assert np.array_equal(h_plain, h_tilde)
            assert np.array_equal(plain.P, stack.P)

    def test_posteriori_identity_every_sample_and_layer(self):
        x, d = _run_pair(seed=6)
        est = MRls(_params(l_max=3))
        for n in range(len(d)):
            h_tilde, _, residuals = est.step(x[n], d[n])
            d_l = d[n]
            for layer in range(3):
                recomputed = d_l - herm_dot(est.h_layers[layer], x[n])
                lhs, rhs = residuals[layer], recomputed
                assert abs(lhs - rhs) <= 1e-9 * (abs(lhs) + abs(rhs) + 1e-12)
                d_l = residuals[layer]

    def test_combined_estimate_sums_selected_layers(self):
        x, d = _run_pair(seed=7)
        est = MRls(_params(l_max=4))
        for n in range(50):
            h_tilde, l_opt, _ = est.step(x[n], d[n])
        np.testing.assert_array_equal(h_tilde, est.h_layers[:l_opt].sum(axis=0))

    def test_selected_depth_in_range(self):
        x, d = _run_pair(seed=8)
        est = MRls(_params(l_max=5))
        for n in range(len(d)):
            _, l_opt, _ = est.step(x[n], d[n])
            assert 1 <= l_opt <= 5

    def test_residual_telescoping(self):
        # the last handed-down signal equals the desired sample minus the
        # full-stack prediction with updated weights; the deep residual is
        # orders of magnitude below d, so the error is taken relative to
        # the sample scale, not the cancelled result
        x, d = _run_pair(seed=9)
        est = MRls(_params(l_max=4))
        for n in range(len(d)):
            _, _, residuals = est.step(x[n], d[n])
            direct = d[n] - herm_dot(est.h_layers.sum(axis=0), x[n])
            assert abs(residuals[-1] - direct) <= 1e-9 * max(abs(d[n]), 1e-12)

    def test_gain_computed_once_per_sample(self, monkeypatch):
        import mrls.estimators as mod

        calls = []
        real = mod.rank1_gain_update

        def counting(P, x, lam):
            calls.append(1)
            return real(P, x, lam)

        monkeypatch.setattr(mod, "rank1_gain_update", counting)
        x, d = _run_pair(seed=10)
        est = MRls(_params(l_max=5))
        for n in range(20):
            est.step(x[n], d[n])
        assert len(calls) == 20
