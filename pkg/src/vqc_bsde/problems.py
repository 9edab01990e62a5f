"""Semilinear parabolic problems in forward-backward form, with exact oracles.

A problem is the data of

    dX_t = b(X_t) dt + sigma(X_t) dW_t,          X_0 = xi
    dY_t = -f(t, X_t, Y_t, Z_t) dt + Z_t . dW_t,  Y_T = g(X_T)

and its solution satisfies Y_0 = u(0, xi).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import ndtr

from .paths import standard_normals

Array = np.ndarray

_SQRT2 = math.sqrt(2.0)
_ORACLE_CHUNK = 20_000


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients of a forward-backward system.

    ``diffusion(x, dw)`` returns sigma(x) @ dw row by row, which covers the
    scalar and diagonal diffusions used here without forming d x d matrices.
    ``driver_grad`` returns (df/dy, df/dz) and is what the trainer
    differentiates through. When ``log_space`` is set, paths are simulated
    on log X with ``log_drift`` / ``log_diffusion`` and exponentiated.
    """

    dim: int
    drift: Callable[[Array], Array]
    diffusion: Callable[[Array, Array], Array]
    driver: Callable[[float, Array, Array, Array], Array]
    driver_grad: Callable[[float, Array, Array, Array], tuple[Array, Array]]
    terminal: Callable[[Array], Array]
    initial: Array
    horizon: float
    log_space: bool = False
    log_drift: Callable[[Array], Array] | None = None
    log_diffusion: Callable[[Array, Array], Array] | None = None
    label: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if np.shape(self.initial) != (self.dim,):
            raise ValueError(f"initial point has shape {np.shape(self.initial)}, expected ({self.dim},)")
        if self.log_space:
            if self.log_drift is None or self.log_diffusion is None:
                raise ValueError("log-space problems need log_drift and log_diffusion")
            if np.any(np.asarray(self.initial) <= 0):
                raise ValueError("log-space problems need a positive initial point")


@dataclass(frozen=True)
class BlackScholesParams:
    rate: float = 0.1
    vol: float = 0.2
    strike: float = 100.0
    spot: float = 100.0
    is_call: bool = True
    num_options: int = 100

    def __post_init__(self):
        if not self.vol > 0:
            raise ValueError("vol must be positive")
        if not self.spot > 0:
            raise ValueError("spot must be positive")
        if not self.strike > 0:
            raise ValueError("strike must be positive")
        if self.num_options < 1:
            raise ValueError("num_options must be >= 1")


@dataclass(frozen=True)
class HjbParams:
    lam: float = 1.0
    dim: int = 100

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


class OracleEstimate(NamedTuple):
    value: float
    stderr: float


def payoff(x: Array, strike: float, is_call: bool) -> Array:
    """Portfolio payoff: one vanilla option per coordinate, summed."""
    sign = 1.0 if is_call else -1.0
    return np.maximum(sign * (x - strike), 0.0).sum(axis=-1)


def make_black_scholes(params: BlackScholesParams, T: float) -> ProblemSpec:
    """Portfolio of ``num_options`` options, one on each of as many independent assets.

    The pricing equation u_t + Lu - r u = 0 has driver f = -r y, so Y grows
    at rate r along paths: dY = r Y dt + Z . dW.
    """
    r, vol, K = params.rate, params.vol, params.strike
    log_drift_value = r - 0.5 * vol * vol

    def driver(t, x, y, z):
        return -r * y

    def driver_grad(t, x, y, z):
        return np.full_like(y, -r), np.zeros_like(z)

    kind = "call" if params.is_call else "put"
    return ProblemSpec(
        dim=params.num_options,
        drift=lambda x: r * x,
        diffusion=lambda x, dw: vol * x * dw,
        driver=driver,
        driver_grad=driver_grad,
        terminal=lambda x: payoff(x, K, params.is_call),
        initial=np.full(params.num_options, float(params.spot)),
        horizon=T,
        log_space=True,
        log_drift=lambda lx: np.full_like(lx, log_drift_value),
        log_diffusion=lambda lx, dw: vol * dw,
        label=f"black_scholes[{kind},K={K:g},d={params.num_options}]",
    )


def hjb_terminal(x: Array) -> Array:
    return np.log(0.5 * (1.0 + np.sum(x * x, axis=-1)))


def make_hjb(params: HjbParams, T: float) -> ProblemSpec:
    """u_t + Laplacian(u) - lam |grad u|^2 = 0 with dX = sqrt(2) dW.

    Z = sqrt(2) grad u, so the driver in terms of z is -(lam / 2) |z|^2 and
    dY = (lam / 2) |Z|^2 dt + Z . dW.
    """
    lam = params.lam

    def driver(t, x, y, z):
        return -0.5 * lam * np.sum(z * z, axis=-1)

    def driver_grad(t, x, y, z):
        return np.zeros_like(y), -lam * z

    return ProblemSpec(
        dim=params.dim,
        drift=np.zeros_like,
        diffusion=lambda x, dw: _SQRT2 * dw,
        driver=driver,
        driver_grad=driver_grad,
        terminal=hjb_terminal,
        initial=np.zeros(params.dim),
        horizon=T,
        label=f"hjb[lambda={lam:g},d={params.dim}]",
    )


def make_constant(dim: int, value: float, T: float) -> ProblemSpec:
    """Driverless problem with constant terminal value; u is identically ``value``."""

    def driver(t, x, y, z):
        return np.zeros_like(y)

    def driver_grad(t, x, y, z):
        return np.zeros_like(y), np.zeros_like(z)

    return ProblemSpec(
        dim=dim,
        drift=np.zeros_like,
        diffusion=lambda x, dw: dw,
        driver=driver,
        driver_grad=driver_grad,
        terminal=lambda x: np.full(x.shape[:-1], float(value)),
        initial=np.zeros(dim),
        horizon=T,
        label=f"constant[{value:g},d={dim}]",
    )


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def bs_single(params: BlackScholesParams, T: float) -> float:
    if not T > 0:
        raise ValueError(f"maturity must be positive, got {T}")
    S, K, r, vol = params.spot, params.strike, params.rate, params.vol
    sd = vol * math.sqrt(T)
    d1 = (math.log(S / K) + (r + 0.5 * vol * vol) * T) / sd
    d2 = d1 - sd
    disc_K = K * math.exp(-r * T)
    if params.is_call:
        return S * norm_cdf(d1) - disc_K * norm_cdf(d2)
    return disc_K * norm_cdf(-d2) - S * norm_cdf(-d1)


def bs_closed_form(params: BlackScholesParams, T: float) -> float:
    """Portfolio value: ``num_options`` times the single-asset Black-Scholes price."""
    return params.num_options * bs_single(params, T)


def bs_delta(params: BlackScholesParams, tau: float, x: Array) -> Array:
    """dV/dx of one option at time-to-maturity ``tau`` and spot ``x`` (elementwise)."""
    K, r, vol = params.strike, params.rate, params.vol
    sd = vol * np.sqrt(tau)
    d1 = (np.log(x / K) + (r + 0.5 * vol * vol) * tau) / sd
    return ndtr(d1) if params.is_call else ndtr(d1) - 1.0


@functools.lru_cache(maxsize=8)
def _hjb_terminal_samples(dim: int, tau: float, x: tuple, n: int, seed: int) -> Array:
    """g(x + sqrt(2 tau) * N(0, I)) for ``n`` samples, in a fixed chunk order."""
    shift = np.asarray(x, dtype=float)
    scale = math.sqrt(2.0 * tau)
    out = np.empty(n)
    for lo in range(0, n, _ORACLE_CHUNK):
        hi = min(lo + _ORACLE_CHUNK, n)
        z = standard_normals(seed, lo * dim, (hi - lo) * dim).reshape(hi - lo, dim)
        out[lo:hi] = hjb_terminal(shift + scale * z)
    out.flags.writeable = False
    return out


def hjb_terminal_samples(dim: int, tau: float, x: Array, n: int, seed: int) -> Array:
    return _hjb_terminal_samples(dim, float(tau), tuple(float(v) for v in x), n, seed)


def certainty_equivalent(g: Array, lam: float) -> OracleEstimate:
    """-(1/lam) log mean(exp(-lam g)) with a log-sum-exp shift, plus a delta-method stderr."""
    a = -lam * g
    a_max = a.max()
    w = np.exp(a - a_max)
    m = w.mean()
    value = -(a_max + math.log(m)) / lam
    if g.size < 2:
        return OracleEstimate(float(value), math.inf)
    stderr = w.std(ddof=1) / math.sqrt(g.size) / (lam * m)
    return OracleEstimate(float(value), float(stderr))


def hjb_exact(params: HjbParams, T: float, x: Array, t: float,
              mc_samples: int = 1_000_000, seed: int = 0) -> OracleEstimate:
    """Monte Carlo value of u(t, x) = -(1/lam) log E[exp(-lam g(x + sqrt(2) (W_T - W_t)))].

    Samples for a given (dim, T - t, x, mc_samples, seed) are cached, so
    calls that differ only in lambda share random numbers.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (params.dim,):
        raise ValueError(f"x has shape {x.shape}, expected ({params.dim},)")
    if t > T:
        raise ValueError(f"t={t} exceeds the horizon T={T}")
    if t < 0:
        raise ValueError(f"t={t} is negative")
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    if t == T:
        return OracleEstimate(float(hjb_terminal(x)), 0.0)
    g = hjb_terminal_samples(params.dim, T - t, x, mc_samples, seed)
    return certainty_equivalent(g, params.lam)
