"""Time-varying tapped-delay-line channel simulator.

Each tap is an independent first-order autoregressive process whose
coefficient is tied to the coherence length N: the tap autocorrelation
decays to one half after exactly N samples. Total tap power is
normalized to one, so SNR in linear units is simply 1 / noise_variance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChannelSpec",
    "ChannelState",
    "default_pdp",
    "load_pdp",
    "regressor_matrix",
    "desired_signal",
]


def default_pdp(n_taps, decay=0.15):
    """Exponential power-delay profile, normalized to unit total power."""
    p = np.exp(-decay * np.arange(n_taps))
    return p / p.sum()


def load_pdp(path, n_taps):
    """Load a power-delay profile: one non-negative power per line.

    The profile must have exactly n_taps entries. If the powers do not sum
    to one they are renormalized with a warning.
    """
    p = np.loadtxt(path, dtype=float, ndmin=1)
    if p.shape != (n_taps,):
        raise ValueError(f"profile in {path} has {p.size} entries, expected {n_taps}")
    if np.any(p < 0.0) or p.sum() <= 0.0:
        raise ValueError(f"profile in {path} must be non-negative with positive sum")
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        warnings.warn(f"power-delay profile sums to {total:.6g}, renormalizing to 1")
    return p / total


@dataclass
class ChannelSpec:
    """Static description of one simulated channel.

    Attributes
    ----------
    n_taps : int
        Number of taps M.
    coherence : float
        Samples N over which each tap's autocorrelation falls to 0.5.
    noise_variance : float
        Complex observation-noise power. SNR_linear = 1 / noise_variance.
    pdp : ndarray
        Per-tap powers, summing to one. Defaults to default_pdp(n_taps).
    input_kind : str
        "bpsk" or "gauss" regressor symbols.
    impulse_time : int or None
        Sample index at which an abrupt change multiplies every tap.
    impulse_gain : float
        Multiplier applied at impulse_time. -1 flips the channel sign.
    """

    n_taps: int
    coherence: float
    noise_variance: float
    pdp: np.ndarray = None
    input_kind: str = "bpsk"
    impulse_time: int | None = None
    impulse_gain: float = -1.0

    def __post_init__(self):
        if self.n_taps < 1:
            raise ValueError(f"n_taps must be >= 1, got {self.n_taps}")
        if self.coherence <= 0:
            raise ValueError(f"coherence must be positive, got {self.coherence}")
        if self.noise_variance < 0:
            raise ValueError(f"noise_variance must be >= 0, got {self.noise_variance}")
        if self.input_kind not in ("bpsk", "gauss"):
            raise ValueError(f"input_kind must be 'bpsk' or 'gauss', got {self.input_kind!r}")
        if self.pdp is None:
            self.pdp = default_pdp(self.n_taps)
        else:
            self.pdp = np.asarray(self.pdp, dtype=float)
            if self.pdp.shape != (self.n_taps,):
                raise ValueError(f"pdp has shape {self.pdp.shape}, expected ({self.n_taps},)")
            if abs(self.pdp.sum() - 1.0) > 1e-12:
                raise ValueError(
                    f"pdp must sum to 1 (got {self.pdp.sum():.6g}); see load_pdp for renormalization"
                )

    @property
    def ar_coefficient(self):
        """AR-1 coefficient a = 2**(-1/N), so the tap ACF halves after N lags."""
        return 2.0 ** (-1.0 / self.coherence)


class ChannelState:
    """Evolving tap vector of a ChannelSpec.

    The state starts from a draw of the stationary tap distribution
    CN(0, diag(pdp)), so time averages match ensemble averages from the
    first sample on; no burn-in period is needed.
    """

    def __init__(self, spec, rng):
        self.spec = spec
        self.rng = rng
        self.a = spec.ar_coefficient
        # innovation scale keeps the stationary per-tap variance at pdp[i]
        self.innovation_std = np.sqrt(spec.pdp * (1.0 - self.a**2))
        root_p = np.sqrt(spec.pdp / 2.0)
        self.h = root_p * (rng.standard_normal(spec.n_taps) + 1j * rng.standard_normal(spec.n_taps))
        self.n = 0

    def step(self):
        """Advance one sample and return the new tap vector h[n]."""
        m = self.spec.n_taps
        g = (self.rng.standard_normal(m) + 1j * self.rng.standard_normal(m)) / np.sqrt(2.0)
        self.h = self.a * self.h + self.innovation_std * g
        if self.spec.impulse_time is not None and self.n == self.spec.impulse_time:
            self.h = self.h * self.spec.impulse_gain
        self.n += 1
        return self.h.copy()

    def trajectory(self, n_samples):
        """Tap vectors for n = 0 .. n_samples-1 as an (n_samples, M) array."""
        out = np.empty((n_samples, self.spec.n_taps), dtype=np.complex128)
        for n in range(n_samples):
            out[n] = self.step()
        return out


def regressor_matrix(stream, n_taps):
    """Tapped-delay-line regressors x[n] = (s[n], s[n-1], ..., s[n-M+1]).

    Samples before the start of the stream are zero. Returns an
    (len(stream), n_taps) array.
    """
    stream = np.asarray(stream, dtype=np.complex128)
    padded = np.concatenate([np.zeros(n_taps - 1, dtype=np.complex128), stream])
    windows = np.lib.stride_tricks.sliding_window_view(padded, n_taps)
    return windows[:, ::-1].copy()


def desired_signal(h, x, w):
    """Observed output h^H x + w, elementwise over leading axes."""
    return np.sum(np.conj(h) * x, axis=-1) + w
