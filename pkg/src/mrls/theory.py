"""Closed-form performance predictors and the independent numerical
oracles used to cross-check them.

Everything here is a pure function of filter constants. The central
quantity is rho = 1 - 2 eps + eps^2 M (eps = 1 - lambda): the one-step
contraction factor of the weight-error covariance under unit-power
regressors. From rho follow the steady-state MSE of exponentially
weighted RLS on a first-order Markov channel, the coherence length of
each layer's effective impulse response, and the layer-residual power
levels that drive depth selection.

All logarithms are natural; coherence is defined by the autocorrelation
falling to one half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import bpsk_stream, cgauss_stream, make_rng
from .channel import regressor_matrix

__all__ = [
    "DerivedConstants",
    "rls_mse",
    "acf_propagate",
    "coherence_from_acf",
    "coherence_recursion",
    "coherence_chain",
    "mrls_mse_predict",
    "posteriori_power_offset",
    "theta_contraction_oracle",
    "noise_term_power",
    "noise_vector_power_mc",
    "q_diagonal",
    "q_diagonal_product",
    "complexity_counts",
]


@dataclass(frozen=True)
class DerivedConstants:
    """Tracking constants derived from (M, lambda)."""

    n_taps: int
    lam: float

    @property
    def eps(self):
        return 1.0 - self.lam

    @property
    def rho(self):
        """Per-sample contraction of the weight-error power."""
        return 1.0 - 2.0 * self.eps + self.eps**2 * self.n_taps

    @property
    def psi(self):
        """Noise-amplification factor eps^2 M / (1 - rho)."""
        return self.eps**2 * self.n_taps / (1.0 - self.rho)

    @property
    def g(self):
        """Per-lag log decay rate of the propagated ACF envelope."""
        return math.log(self.rho / self.lam**2)

    @property
    def q_ratio(self):
        """Per-lag geometric factor lambda^2 / rho of the ACF recursion."""
        return self.lam**2 / self.rho

    def require_stable(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(
                f"rho={self.rho:.6g} outside (0, 1); need 1 - 2/M < lam < 1 "
                f"(M={self.n_taps}, lam={self.lam})"
            )


def rls_mse(params, coherence):
    """Steady-state weight-error power of classic RLS.

    The channel decorrelates over `coherence` samples; the estimator lags
    it by rho^N and adds a noise floor (1 - rho^(N+1)) psi sigma_w^2.
    """
    c = DerivedConstants(params.n_taps, params.lam)
    c.require_stable()
    rho = c.rho
    return rho**coherence + (1.0 - rho ** (coherence + 1)) * c.psi * params.noise_variance


def _extend_tail(phi, length):
    """Extend a decaying curve to `length` points by fitting exp(-beta m)
    over its last decade of values."""
    phi = np.asarray(phi, dtype=float)
    if len(phi) >= length:
        return phi
    window = (phi > 0.0) & (phi <= 10.0 * phi[-1])
    m_fit = np.nonzero(window)[0]
    if m_fit.size < 2:
        raise ValueError("need at least two positive points within a decade of the tail to extend")
    beta, log_a = np.polyfit(m_fit, np.log(phi[m_fit]), 1)
    tail = np.exp(log_a + beta * np.arange(len(phi), length))
    return np.concatenate([phi, tail])


def acf_propagate(phi, window, consts):
    """One-layer ACF recursion.

    Given the normalized autocorrelation phi of a layer's effective
    impulse response and the averaging window length of that layer's
    estimator, returns the normalized autocorrelation of the next layer's
    effective impulse response over the same lag range:

        phi'[m] = (2 phi[m] - phi[|m - window|] - phi[m + window]) * q[m]

    with q[m] = (lambda^2 / rho)^min(m, window), renormalized to
    phi'[0] = 1. Lags beyond the stored range are supplied by an
    exponential tail fit.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    phi = np.asarray(phi, dtype=float)
    ext = _extend_tail(phi, len(phi) + window)
    m = np.arange(len(phi))
    q = consts.q_ratio ** np.minimum(m, window)
    nxt = (2.0 * ext[m] - ext[np.abs(m - window)] - ext[m + window]) * q
    if nxt[0] <= 0.0:
        raise ValueError("propagated ACF has non-positive zero lag; cannot normalize")
    return nxt / nxt[0]


def coherence_from_acf(phi):
    """Smallest lag at which the normalized ACF has fallen to one half."""
    phi = np.asarray(phi, dtype=float)
    below = np.nonzero(phi <= 0.5)[0]
    if below.size == 0:
        raise LookupError("no 0.5 crossing within the stored lag range")
    return int(below[0])


def coherence_recursion(coherence, consts):
    """Closed-form coarse estimate of the next layer's coherence length,
    ceil(N ln2 / (N g + 3 ln2)). Coarser than the full ACF propagation;
    kept as the fast approximation."""
    ln2 = math.log(2.0)
    return math.ceil(coherence * ln2 / (coherence * consts.g + 3.0 * ln2))


def coherence_chain(coherence, layers, consts):
    """Coherence lengths of successive effective impulse responses.

    Starts from the exponential ACF exp(-m ln2 / N) of the channel itself
    and alternates acf_propagate / coherence_from_acf, truncating each
    propagated curve at its half-crossing. The averaging window of step l
    is N minus the previous crossing: deeper layers see a residual whose
    fast part the previous layer already removed, which lengthens the
    effective averaging span back toward N.

    Returns `layers` crossings, for the effective responses of layers
    2 .. layers+1.
    """
    if layers < 1:
        raise ValueError(f"layers must be >= 1, got {layers}")
    n0 = int(coherence)
    phi = np.exp(-math.log(2.0) * np.arange(n0 + 1) / coherence)
    crossings = []
    c_prev = 0
    for _ in range(layers):
        nxt = acf_propagate(phi, n0 - c_prev, consts)
        c = coherence_from_acf(nxt)
        crossings.append(c)
        phi = nxt[: c + 1]
        c_prev = c
    return crossings


def mrls_mse_predict(params, coherence_sequence):
    """Steady-state weight-error power of the layered estimator.

    coherence_sequence holds the coherence length seen by each layer,
    outermost first. The prediction is the product of per-layer lag
    factors rho^N_l plus an accumulated noise term; the cross-correlation
    between lag and noise errors has no closed form and is taken as zero,
    so this is an approximation.
    """
    if len(coherence_sequence) == 0:
        raise ValueError("coherence_sequence must not be empty")
    c = DerivedConstants(params.n_taps, params.lam)
    c.require_stable()
    rho = c.rho
    sigma2 = params.noise_variance
    v = (1.0 - rho ** (coherence_sequence[0] + 1)) * c.psi * sigma2
    for n_l in coherence_sequence[1:]:
        v = rho**n_l * v + (1.0 - rho ** (n_l + 1)) * c.psi * sigma2
    lag = rho ** sum(coherence_sequence)
    return lag + v


def posteriori_power_offset(layer, params):
    """Additive offset relating a layer's residual power to the power of
    the next effective impulse response:

        E||h_(l+1)||^2 = E|d_(l+1)|^2 + (1 - 2 (1 - eps M)^l) sigma_w^2
    """
    if layer < 1:
        raise ValueError(f"layer must be >= 1, got {layer}")
    eps_m = (1.0 - params.lam) * params.n_taps
    return (1.0 - 2.0 * (1.0 - eps_m) ** layer) * params.noise_variance


def theta_contraction_oracle(n_taps, lam, trials, rng=None, n_fold=1):
    """Monte Carlo estimate of the power contraction of the weight-error
    propagator Theta = I - eps x x^H over independent BPSK regressors.

    Applies n_fold independent Theta factors to random complex Gaussian
    vectors and returns mean ||Theta^(fold) a||^2 / mean ||a||^2, which
    should approach rho^n_fold.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = make_rng(0) if rng is None else rng
    eps = 1.0 - lam
    a = cgauss_stream(rng, trials * n_taps).reshape(trials, n_taps)
    power_in = np.sum(np.abs(a) ** 2)
    for _ in range(n_fold):
        x = bpsk_stream(rng, trials * n_taps).reshape(trials, n_taps)
        proj = np.sum(np.conj(x) * a, axis=1, keepdims=True)
        a = a - eps * x * proj
    power_out = np.sum(np.abs(a) ** 2)
    return power_out / power_in


def noise_term_power(params, window):
    """Closed-form power of the accumulated noise vector after `window`
    updates: eps^2 M (1 - rho^window) / (1 - rho) sigma_w^2."""
    c = DerivedConstants(params.n_taps, params.lam)
    rho = c.rho
    return c.eps**2 * params.n_taps * (1.0 - rho**window) / (1.0 - rho) * params.noise_variance


def noise_vector_power_mc(params, window, realizations, rng=None):
    """Brute-force Monte Carlo of the accumulated noise vector power.

    Builds c[n] = sum_k (prod_{i<k} Theta[n-i]) gamma[n-k] explicitly from
    a BPSK tapped-delay stream and complex Gaussian noise, by reverse
    accumulation, and averages ||c||^2 over realizations.
    """
    rng = make_rng(0) if rng is None else rng
    m = params.n_taps
    eps = params.eps
    total = 0.0
    for _ in range(realizations):
        stream = bpsk_stream(rng, window + m - 1)
        x = regressor_matrix(stream, m)[m - 1 :]
        w = cgauss_stream(rng, window, params.noise_variance)
        # lag order: index j holds time n - j
        x_lag = x[::-1]
        gamma = eps * np.conj(w[::-1])[:, None] * x_lag
        s = gamma[window - 1]
        for j in range(window - 2, -1, -1):
            s = gamma[j] + s - eps * x_lag[j] * np.vdot(x_lag[j], s)
        total += np.sum(np.abs(s) ** 2)
    return total / realizations


def q_diagonal(m, window, consts):
    """Deterministic diagonal of the lag-m product of two weight-error
    propagators averaged over a window: lambda^(2m) rho^(window-m) up to
    m = window, saturating at lambda^(2 window) beyond."""
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    if m <= window:
        return consts.lam ** (2 * m) * consts.rho ** (window - m)
    return consts.lam ** (2 * window)


def q_diagonal_product(m, window, consts, x2):
    """Same diagonal built factor by factor from per-sample regressor
    powers x2[j] = |x_i[n-j]|^2.

    The two propagator windows overlap over window - m lags (for
    m <= window); overlapping lags contribute 1 + (eps^2 M - 2 eps) x2,
    non-overlapping lags contribute 1 - eps x2 from one side each. For
    unit-modulus inputs this telescopes exactly to q_diagonal.
    """
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    x2 = np.asarray(x2, dtype=float)
    if len(x2) < m + window:
        raise ValueError(f"need {m + window} regressor powers, got {len(x2)}")
    eps = consts.eps
    overlap_coeff = eps**2 * consts.n_taps - 2.0 * eps
    if m <= window:
        own = np.prod(1.0 - eps * x2[:m])
        shared = np.prod(1.0 + overlap_coeff * x2[m:window])
        other = np.prod(1.0 - eps * x2[window : m + window])
        return own * shared * other
    own = np.prod(1.0 - eps * x2[:window])
    other = np.prod(1.0 - eps * x2[m : m + window])
    return own * other


def complexity_counts(n_taps, l_max, l_opt, impl, n_itr=4):
    """Per-sample operation counts of the layered estimator.

    impl "classic" uses the full inverse-correlation update; "dcd"
    replaces the matrix steps with a coordinate-descent solver running
    n_itr iterations. Returns {"mult", "add", "div"}.
    """
    if not 1 <= l_opt <= l_max:
        raise ValueError(f"need 1 <= l_opt <= l_max, got l_opt={l_opt}, l_max={l_max}")
    m, l = n_taps, l_max
    if impl == "classic":
        return {
            "mult": 6 * m**2 + (2 * l + 5) * m + 5 * l + 1,
            "add": 6 * m**2 + (2 * l + l_opt - 2) * m + 3 * l,
            "div": m,
        }
    if impl == "dcd":
        return {
            "mult": (2 * l + 2) * m + l,
            "add": ((2 * n_itr + 4) * l + l_opt + 2) * m + 3 * l,
            "div": 0,
        }
    raise ValueError(f"impl must be 'classic' or 'dcd', got {impl!r}")
