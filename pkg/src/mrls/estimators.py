"""Exponentially weighted RLS and its multi-layered extension.

The layered estimator runs a stack of RLS filters that all share one gain
vector per sample. Layer 1 adapts to the observed output; each deeper
layer adapts to the a-posteriori residual of the layer above, so layer
l tracks what is left of the channel variation after l-1 sweeps. A
running power estimate of each layer's residual, compared against a
per-layer noise threshold, picks how many layers are worth summing into
the combined weight estimate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .numerics import herm_dot, rank1_gain_update

__all__ = [
    "FilterParams",
    "Rls",
    "MRls",
    "pi_update",
    "layer_select",
]


@dataclass
class FilterParams:
    """Adaptation constants shared by all estimator layers.

    Attributes
    ----------
    n_taps : int
        Filter length M.
    lam : float
        Forgetting factor. Tracking stays stable for 1 - 2/M < lam < 1.
    delta : float
        Inverse of the initial inverse-correlation scale, P[0] = I / delta.
    z : float
        Smoothing constant of the residual-power estimates.
    l_max : int
        Number of layers in the stack.
    noise_variance : float
        Observation-noise power, used in the layer-selection thresholds.
    """

    n_taps: int
    lam: float
    delta: float = 0.01
    z: float = 2.0**-5
    l_max: int = 5
    noise_variance: float = 0.0

    def __post_init__(self):
        if self.n_taps < 1:
            raise ValueError(f"n_taps must be >= 1, got {self.n_taps}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lam must be in (0, 1], got {self.lam}")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not 0.0 < self.z <= 1.0:
            raise ValueError(f"z must be in (0, 1], got {self.z}")
        if self.l_max < 1:
            raise ValueError(f"l_max must be >= 1, got {self.l_max}")
        if self.noise_variance < 0.0:
            raise ValueError(f"noise_variance must be >= 0, got {self.noise_variance}")
        if not 1.0 - 2.0 / self.n_taps < self.lam < 1.0:
            warnings.warn(
                f"lam={self.lam} outside the stable tracking range "
                f"({1.0 - 2.0 / self.n_taps:.6g}, 1) for {self.n_taps} taps"
            )

    @property
    def eps(self):
        return 1.0 - self.lam

    @property
    def r_thresholds(self):
        """Expected steady residual powers r(l) = 2 (1 - eps M)^l sigma_w^2."""
        l = np.arange(1, self.l_max + 1)
        return 2.0 * (1.0 - self.eps * self.n_taps) ** l * self.noise_variance


def pi_update(pi_prev, d_next, z):
    """Exponentially smoothed power of a residual sequence."""
    return (1.0 - z) * pi_prev + z * abs(d_next) ** 2


def layer_select(pi, r, j_init):
    """Deepest-profitable-layer rule.

    Scans layers in order, tracking the running minimum of the excess
    residual power J(l) = pi[l] - r[l] starting from j_init, and returns
    the 1-based index of the first layer attaining the minimum. A deeper
    layer wins only by strict improvement.
    """
    if len(pi) == 0 or len(r) == 0:
        raise ValueError("pi and r must be nonempty")
    j_min = j_init
    l_opt = 1
    for i in range(len(pi)):
        j = pi[i] - r[i]
        if j < j_min:
            j_min = j
            l_opt = i + 1
    return l_opt


class Rls:
    """Plain exponentially weighted RLS estimator."""

    def __init__(self, params):
        self.params = params
        self.P = np.eye(params.n_taps, dtype=np.complex128) / params.delta
        self.h_hat = np.zeros(params.n_taps, dtype=np.complex128)

    def step(self, x, d):
        """Consume one sample; return the updated estimate and the
        a-priori error."""
        k, self.P, _ = rank1_gain_update(self.P, x, self.params.lam)
        e = d - herm_dot(self.h_hat, x)
        self.h_hat += np.conj(e) * k
        return self.h_hat, e


class MRls:
    """Layered RLS stack with shared gain and automatic depth selection.

    State
    -----
    h_layers : (l_max, M) complex ndarray
        Per-layer weight estimates; the combined estimate is the sum of
        the first l_opt rows.
    pi : (l_max,) float ndarray
        Smoothed residual powers feeding the depth selection.
    """

    def __init__(self, params):
        self.params = params
        self.P = np.eye(params.n_taps, dtype=np.complex128) / params.delta
        self.h_layers = np.zeros((params.l_max, params.n_taps), dtype=np.complex128)
        self.pi = np.zeros(params.l_max)
        self.last_errors = np.zeros(params.l_max, dtype=np.complex128)
        self.l_opt = 1

    def step(self, x, d):
        """Consume one sample.

        Returns (h_tilde, l_opt, residuals): the combined estimate, the
        selected depth, and the a-posteriori residual handed to each next
        layer (residuals[l-1] is the desired signal of layer l+1).
        """
        p = self.params
        k, self.P, T = rank1_gain_update(self.P, x, p.lam)
        residuals = np.empty(p.l_max, dtype=np.complex128)

        d_l = d
        for i in range(p.l_max):
            e = d_l - herm_dot(self.h_layers[i], x)
            self.h_layers[i] += np.conj(e) * k
            d_l = e * T
            residuals[i] = d_l
            self.pi[i] = pi_update(self.pi[i], d_l, p.z)
            self.last_errors[i] = e

        self.l_opt = layer_select(self.pi, p.r_thresholds, 1.0 / p.delta)
        h_tilde = self.h_layers[: self.l_opt].sum(axis=0)
        return h_tilde, self.l_opt, residuals
