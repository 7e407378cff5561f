"""Angle arithmetic helpers.

Two angular domains coexist in fingerprint templates: minutia *directions*
live in [0, 2pi) while ridge-flow *orientations* (undirected) live in
[0, pi).  All range reductions in the package go through these functions so
that equality of canonically constructed angles is bitwise reproducible.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_direction(alpha: float) -> float:
    """Reduce a direction to [0, 2pi)."""
    a = math.fmod(float(alpha), TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:  # fmod/+ rounding can land exactly on 2pi
        a = 0.0
    return a


def wrap_orientation(theta: float) -> float:
    """Reduce an undirected orientation to [0, pi)."""
    t = math.fmod(float(theta), math.pi)
    if t < 0.0:
        t += math.pi
    if t >= math.pi:
        t = 0.0
    return t


def antipode(alpha: float) -> float:
    """Canonical opposite direction, ``wrap_direction(alpha + pi)``.

    Paired virtual minutiae are constructed and checked through this
    function, so "differs by pi" is a bitwise-exact relation.
    """
    return wrap_direction(float(alpha) + math.pi)


def signed_delta(angle: float) -> float:
    """Map any angle to the signed interval (-pi, pi]."""
    a = math.fmod(float(angle), TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


def wrap_direction_array(alpha: np.ndarray) -> np.ndarray:
    out = np.mod(np.asarray(alpha, dtype=np.float64), TWO_PI)
    out[out >= TWO_PI] = 0.0
    return out


def wrap_orientation_array(theta: np.ndarray) -> np.ndarray:
    out = np.mod(np.asarray(theta, dtype=np.float64), math.pi)
    out[out >= math.pi] = 0.0
    return out


def circular_difference(a, b):
    """min(|a - b|, 2pi - |a - b|), elementwise for arrays."""
    delta = np.mod(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64), TWO_PI)
    return np.minimum(delta, TWO_PI - delta)
