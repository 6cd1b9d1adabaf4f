# services/special_functions.py
"""
Bessel functions J0, Y0, J1, Y1 of real positive argument and the Hankel
functions of the first kind built from them.

Ascending series are used up to SERIES_LIMIT, the Hankel asymptotic
expansion (truncated at its smallest term) beyond it.
"""
from typing import Tuple
import numpy as np

EULER_GAMMA = 0.57721566490153286061
SERIES_LIMIT = 12.0
_SERIES_TERMS = 60
_ASYMPTOTIC_TERMS = 40


def _as_positive_array(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("Bessel functions of the second kind need finite x > 0")
    return arr


def _series_order0(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    q = -(x * x) / 4.0
    term = np.ones_like(x)
    j0 = np.ones_like(x)
    harmonic_sum = np.zeros_like(x)
    harmonic = 0.0
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        harmonic += 1.0 / k
        j0 = j0 + term
        harmonic_sum = harmonic_sum + harmonic * term
    y0 = (2.0 / np.pi) * ((np.log(x / 2.0) + EULER_GAMMA) * j0 - harmonic_sum)
    return j0, y0


def _series_order1(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    q = -(x * x) / 4.0
    term = np.ones_like(x)          # q^k / (k! (k+1)!)
    series = np.ones_like(x)
    harmonic_k, harmonic_k1 = 0.0, 1.0
    weighted = harmonic_k1 * term   # (H_k + H_{k+1}) q^k / (k! (k+1)!)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + 1))
        harmonic_k = harmonic_k1
        harmonic_k1 += 1.0 / (k + 1)
        series = series + term
        weighted = weighted + (harmonic_k + harmonic_k1) * term
    j1 = (x / 2.0) * series
    y1 = (2.0 / np.pi) * (np.log(x / 2.0) + EULER_GAMMA) * j1 - 2.0 / (np.pi * x) - (x / (2.0 * np.pi)) * weighted
    return j1, y1


def _asymptotic(x: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Hankel expansion J = s (P cos chi - Q sin chi), Y = s (P sin chi + Q cos chi)."""
    mu = 4.0 * order * order
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    a = 1.0
    previous = np.full_like(x, np.inf)
    active = np.ones_like(x, dtype=bool)
    for k in range(1, _ASYMPTOTIC_TERMS):
        a = a * (mu - (2 * k - 1) ** 2) / (8.0 * k)
        term = a / x ** k
        active &= np.abs(term) < previous
        previous = np.abs(term)
        if not active.any():
            break
        signed = term * (-1.0) ** (k // 2)
        contribution = np.where(active, signed, 0.0)
        if k % 2 == 0:
            P = P + contribution
        else:
            Q = Q + contribution
    chi = x - (order / 2.0 + 0.25) * np.pi
    s = np.sqrt(2.0 / (np.pi * x))
    return s * (P * np.cos(chi) - Q * np.sin(chi)), s * (P * np.sin(chi) + Q * np.cos(chi))


def _bessel_pair(x, order: int) -> Tuple[np.ndarray, np.ndarray]:
    arr = _as_positive_array(x)
    flat = np.atleast_1d(arr).ravel()
    j = np.empty_like(flat)
    y = np.empty_like(flat)
    small = flat <= SERIES_LIMIT
    series = _series_order0 if order == 0 else _series_order1
    if small.any():
        j[small], y[small] = series(flat[small])
    if (~small).any():
        j[~small], y[~small] = _asymptotic(flat[~small], order)
    return j.reshape(arr.shape), y.reshape(arr.shape)


def _scalar_or_array(values: np.ndarray):
    return float(values) if values.ndim == 0 else values


def bessel_j0(x):
    return _scalar_or_array(_bessel_pair(x, 0)[0])


def bessel_y0(x):
    return _scalar_or_array(_bessel_pair(x, 0)[1])


def bessel_j1(x):
    return _scalar_or_array(_bessel_pair(x, 1)[0])


def bessel_y1(x):
    return _scalar_or_array(_bessel_pair(x, 1)[1])


def hankel0_first_kind(x):
    """
    H0^(1)(x) = J0(x) + i Y0(x).

    Raises:
        ValueError: If any x <= 0.
    """
    j, y = _bessel_pair(x, 0)
    h = j + 1j * y
    return complex(h) if h.ndim == 0 else h


def hankel1_first_kind(x):
    """H1^(1)(x) = J1(x) + i Y1(x); note d/dx H0^(1) = -H1^(1)."""
    j, y = _bessel_pair(x, 1)
    h = j + 1j * y
    return complex(h) if h.ndim == 0 else h
