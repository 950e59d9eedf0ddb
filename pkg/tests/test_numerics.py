import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrls import (
    NumericalBreakdownError,
    bpsk_stream,
    cgauss_stream,
    herm_dot,
    make_rng,
    rank1_gain_update,
)


def _cvec(length, max_mag=10.0):
    elem = st.complex_numbers(
        max_magnitude=max_mag, allow_nan=False, allow_infinity=False
    )
    return st.lists(elem, min_size=length, max_size=length).map(
        lambda v: np.array(v, dtype=np.complex128)
    )


class TestHermDot:
    def test_bpsk_self_energy(self):
        a = np.ones(50, dtype=np.complex128)
        assert herm_dot(a, a) == 50 + 0j

    def test_orthogonal_basis(self):
        e0 = np.array([1, 0], dtype=np.complex128)
        e1 = np.array([0, 1], dtype=np.complex128)
        assert herm_dot(e0, e1) == 0

    def test_conjugates_first_argument(self):
        a = np.array([1 + 1j, 0])
        assert herm_dot(a, a) == pytest.approx(2 + 0j)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            herm_dot(np.ones(3, complex), np.ones(4, complex))

    @given(st.integers(1, 8).flatmap(lambda n: st.tuples(_cvec(n), _cvec(n))))
    @settings(max_examples=60, deadline=None)
    def test_conjugate_symmetry(self, ab):
        a, b = ab
        lhs = herm_dot(a, b)
        rhs = np.conj(herm_dot(b, a))
        assert lhs == pytest.approx(rhs, abs=1e-9)


class TestRank1GainUpdate:
    def test_scalar_by_hand(self):
        P = np.array([[100.0 + 0j]])
        x = np.array([1.0 + 0j])
        k, P_next, T = rank1_gain_update(P, x, 0.99)
        assert k[0] == pytest.approx(100 / 100.99, rel=1e-9)
        assert P_next[0, 0] == pytest.approx(0.9901970, rel=1e-6)
        assert T == pytest.approx(0.0098030, rel=1e-4)

    def test_zero_excitation(self):
        P = np.diag([2.0, 3.0]).astype(np.complex128)
        x = np.zeros(2, dtype=np.complex128)
        k, P_next, T = rank1_gain_update(P, x, 0.5)
        assert np.all(k == 0)
        np.testing.assert_array_equal(P_next, P / 0.5)
        assert T == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rank1_gain_update(np.eye(3, dtype=complex), np.ones(2, complex), 0.9)

    def test_breakdown_on_lost_definiteness(self):
        P = -np.eye(2, dtype=np.complex128)
        x = np.array([1.0, 0.0], dtype=np.complex128)
        with pytest.raises(NumericalBreakdownError):
            rank1_gain_update(P, x, 0.5)

    def test_breakdown_on_nonfinite(self):
        P = np.eye(2, dtype=np.complex128) * np.nan
        x = np.ones(2, dtype=np.complex128)
        with pytest.raises(NumericalBreakdownError):
            rank1_gain_update(P, x, 0.9)

    def test_diag_settles_at_eps_for_bpsk(self):
        # steady state of the inverse correlation under unit-power input
        m, lam = 8, 0.99
        rng = make_rng(3)
        P = np.eye(m, dtype=np.complex128) / 0.01
        stream = bpsk_stream(rng, 2000 + m)
        for n in range(2000):
            _, P, _ = rank1_gain_update(P, stream[n : n + m], lam)
        eps = 1 - lam
        assert np.mean(P.diagonal().real) == pytest.approx(eps, rel=0.1)

    def test_hermitian_preserved_over_long_run(self):
        rng = make_rng(7)
        m = 6
        P = np.eye(m, dtype=np.complex128) / 0.01
        for _ in range(500):
            x = cgauss_stream(rng, m)
            _, P, _ = rank1_gain_update(P, x, 0.97)
        assert np.max(np.abs(P - P.conj().T)) < 1e-9

    def test_unit_lambda_conversion_factor_monotone(self):
        # repeated identical excitation: P shrinks along x, so k^H x
        # decays monotonically to 0 and T = 1 - k^H x climbs to 1
        rng = make_rng(11)
        x = cgauss_stream(rng, 5)
        P = np.eye(5, dtype=np.complex128) / 0.01
        last = 1.0
        t_values = []
        for _ in range(60):
            k, P, T = rank1_gain_update(P, x, 1.0)
            kx = np.vdot(k, x).real
            assert kx < last
            last = kx
            t_values.append(T.real)
        assert t_values == sorted(t_values)
        assert t_values[-1] > 0.95


class TestStreams:
    def test_bpsk_values_and_mean(self):
        s = bpsk_stream(make_rng(0), 10**6)
        assert np.all(np.abs(s) ** 2 == 1.0)
        assert abs(s.mean()) < 0.01

    def test_bpsk_deterministic(self):
        a = bpsk_stream(make_rng(42), 1000)
        b = bpsk_stream(make_rng(42), 1000)
        np.testing.assert_array_equal(a, b)

    def test_cgauss_moments(self):
        s = cgauss_stream(make_rng(1), 10**6, variance=1.0)
        assert np.mean(np.abs(s) ** 2) == pytest.approx(1.0, rel=0.01)
        # circular symmetry: non-conjugated second moment vanishes
        assert abs(np.mean(s**2)) < 0.01

    def test_cgauss_zero_variance(self):
        s = cgauss_stream(make_rng(2), 100, variance=0.0)
        assert np.all(s == 0)

    def test_cgauss_negative_variance(self):
        with pytest.raises(ValueError):
            cgauss_stream(make_rng(2), 10, variance=-1.0)

    def test_cgauss_scales_variance(self):
        s = cgauss_stream(make_rng(4), 10**5, variance=0.25)
        assert np.mean(np.abs(s) ** 2) == pytest.approx(0.25, rel=0.05)
