"""Closed-form bit-error-rate predictions.

``erfc`` is computed here rather than taken from the platform so that the
numbers are the same everywhere:

* ``|x| < 2``: ``erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (2n+1)!!``.
  All terms are positive, so there is no cancellation; summed until the term
  drops below 1e-17 of the total.
* ``x >= 2``: the continued fraction
  ``erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))``
  evaluated with the modified Lentz method to relative 1e-16.
* ``x <= -2``: reflection ``erfc(x) = 2 - erfc(-x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite

from .matched_filter import CorrelationTable

_SQRT_PI = math.sqrt(math.pi)
_TINY = 1e-300


def _erf_series(x: float) -> float:
    term = x
    total = x
    n = 0
    while abs(term) > 1e-17 * abs(total):
        n += 1
        term *= 2.0 * x * x / (2 * n + 1)
        total += term
    return 2.0 / _SQRT_PI * math.exp(-x * x) * total


def _erfc_cf(x: float) -> float:
    # continued fraction b0 + a1/(b1 + a2/(b2 + ...)) with b_k = x, a_k = k/2
    f = x
    c = x
    d = 0.0
    for k in range(1, 500):
        a = 0.5 * k
        d = x + a * d
        d = _TINY if d == 0 else d
        c = x + a / c
        c = _TINY if c == 0 else c
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x * x) / _SQRT_PI / f


def _erfc_scalar(x: float) -> float:
    if not math.isfinite(x):
        if math.isnan(x):
            return math.nan
        return 0.0 if x > 0 else 2.0
    if abs(x) < 2.0:
        return 1.0 - _erf_series(x)
    if x > 0:
        return _erfc_cf(x)
    return 2.0 - _erfc_cf(-x)


def _erfc_array(x: np.ndarray) -> np.ndarray:
    # same expansions as the scalar path, iterated on whole arrays
    out = np.empty_like(x)
    a = np.abs(x)
    small = a < 2.0
    xs = x[small]
    term = xs.copy()
    total = xs.copy()
    for n in range(1, 200):
        term *= 2.0 * xs * xs / (2 * n + 1)
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    out[small] = 1.0 - 2.0 / _SQRT_PI * np.exp(-xs * xs) * total
    big = ~small & np.isfinite(x)
    z = a[big]
    f = z.copy()
    c = z.copy()
    d = np.zeros_like(z)
    for k in range(1, 500):
        half = 0.5 * k
        d = z + half * d
        d[d == 0] = _TINY
        c = z + half / c
        c[c == 0] = _TINY
        d = 1.0 / d
        delta = c * d
        f *= delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    tail = np.exp(-z * z) / _SQRT_PI / f
    out[big] = np.where(x[big] > 0, tail, 2.0 - tail)
    out[np.isposinf(x)] = 0.0
    out[np.isneginf(x)] = 2.0
    out[np.isnan(x)] = np.nan
    return out


def erfc(x):
    """Complementary error function for scalars or arrays."""
    if np.ndim(x) == 0:
        return _erfc_scalar(float(x))
    return _erfc_array(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class BerPrediction:
    ebn0_db: float
    ber: float
    policy: str

    def __post_init__(self):
        if not 0.0 <= self.ber <= 0.5:
            raise ValueError("ber must lie in [0, 0.5]")


def ber_optimal(p_total: float, sigma_w: float) -> float:
    """Error rate with the full-ISI threshold: ``0.5 erfc(P / sqrt(2 sigma^2))``."""
    if sigma_w == 0:
        return 0.0 if p_total > 0 else 0.5
    return 0.5 * _erfc_scalar(p_total / (math.sqrt(2.0) * sigma_w))


def ber_suboptimal(p_total: float, k_const: float, sigma_w: float, params) -> float:
    """Error rate with the past-only threshold.

    The unknown future ISI is modelled as uniform on ``[-a, a]`` with
    ``a = |K| / (e^{b/f} - 1)`` and the Gaussian tail is averaged over it in
    closed form.
    """
    a = abs(k_const) / (math.exp(params.beta / params.f) - 1.0)
    if a == 0:
        return ber_optimal(p_total, sigma_w)
    if sigma_w == 0:
        # limit of the uniform average: fraction of the support below -P
        return min(0.5, max(0.0, (a - p_total) / (2 * a))) if p_total < a else 0.0
    s = math.sqrt(2.0) * sigma_w
    if a / s < 0.05:
        return _uniform_average_series(p_total / s, a / s)
    z1 = (p_total + a) / s
    z2 = (p_total - a) / s
    bracket = (z1 * _erfc_scalar(z1) - z2 * _erfc_scalar(z2)
               - math.exp(-z1 * z1) / _SQRT_PI + math.exp(-z2 * z2) / _SQRT_PI)
    return s / (4.0 * a) * bracket


def _uniform_average_series(z: float, h: float, terms: int = 5) -> float:
    """Mean of ``0.5 erfc(z + u)`` for ``u ~ U[-h, h]``, for small ``h``.

    Even Taylor terms ``h^(2k) / (2k+1)! * erfc^(2k)(z) / 2`` with
    ``erfc^(2k)(z) = 2/sqrt(pi) H_{2k-1}(z) exp(-z^2)``; the closed form
    cancels badly here.
    """
    total = 0.5 * _erfc_scalar(z)
    gauss = 2.0 / _SQRT_PI * math.exp(-z * z)
    for k in range(1, terms + 1):
        coef = np.zeros(2 * k)
        coef[-1] = 1.0
        total += 0.5 * h ** (2 * k) / math.factorial(2 * k + 1) * gauss * hermite.hermval(z, coef)
    return total


def ber_suboptimal_lattice(p_total: float, k_const: float, sigma_w: float, params,
                           exact_terms: int = 16) -> float:
    """Same average as :func:`ber_suboptimal` over the true discrete future ISI.

    ``K sum_i s_{n+i} e^{-b i/f}`` is enumerated over the first
    ``exact_terms`` future symbols (2**terms equally likely values); the
    remaining tail is below ``|K| e^{-b*terms/f}`` and is dropped.
    """
    lam = math.exp(-params.beta / params.f)
    if sigma_w == 0:
        raise ValueError("lattice average needs sigma_w > 0")
    weights = k_const * lam ** np.arange(1, exact_terms + 1)
    values = np.zeros(1)
    for w in weights:
        values = np.concatenate([values + w, values - w])
    z = (p_total + values) / (math.sqrt(2.0) * sigma_w)
    return float(0.5 * np.mean(erfc(z)))


def single_path_lower_bound(ebn0_db: float) -> float:
    """``0.5 erfc(sqrt(Eb/N0))``: the single-path optimal-threshold rate."""
    if ebn0_db == -math.inf:
        return 0.5
    return 0.5 * _erfc_scalar(math.sqrt(10.0 ** (ebn0_db / 10.0)))


def sigma_w_for(ebn0_db: float, e_p: float) -> float:
    """Filtered-noise deviation at a given Eb/N0 with ``E_b = E_p``."""
    n0 = e_p / 10.0 ** (ebn0_db / 10.0)
    return math.sqrt(0.5 * n0 * e_p)


def predict(table: CorrelationTable, ebn0_db: float, params, policy: str = "subopt") -> BerPrediction:
    sigma = sigma_w_for(ebn0_db, table.e_p)
    if policy == "genie":
        ber = ber_optimal(table.p_total, sigma)
    elif policy == "subopt":
        ber = ber_suboptimal(table.p_total, table.k_const, sigma, params)
    elif policy == "lattice":
        ber = ber_suboptimal_lattice(table.p_total, table.k_const, sigma, params)
    else:
        raise ValueError(f"no closed form for policy {policy!r}")
    return BerPrediction(ebn0_db, ber, policy)


def required_ebn0_analytic(table: CorrelationTable, params, target_ber: float = 1e-3,
                           policy: str = "subopt", bracket=(-10.0, 25.0)) -> float:
    """Eb/N0 (dB) where the closed-form prediction equals ``target_ber``."""
    from scipy.optimize import brentq

    def gap(db):
        return math.log(predict(table, db, params, policy).ber) - math.log(target_ber)

    lo, hi = bracket
    if gap(lo) < 0 or gap(hi) > 0:
        raise ValueError("target BER not reachable inside the bracket")
    return brentq(gap, lo, hi, xtol=1e-10)
