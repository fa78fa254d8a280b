"""Closed-form 3x3 helpers for the hot paths.

Edge operations invert and validate thousands of small information
matrices; generic LAPACK calls dominate the runtime there, so these use
explicit adjugate/minor formulas instead.
"""

from __future__ import annotations

import math

import numpy as np


def sym3(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def det3(m: np.ndarray) -> float:
    a, b, c = float(m[0, 0]), float(m[0, 1]), float(m[0, 2])
    d, e, f = float(m[1, 0]), float(m[1, 1]), float(m[1, 2])
    g, h, i = float(m[2, 0]), float(m[2, 1]), float(m[2, 2])
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def inv3(m: np.ndarray) -> np.ndarray:
    """Inverse via the adjugate; raises numpy.linalg.LinAlgError when singular."""
    a, b, c = float(m[0, 0]), float(m[0, 1]), float(m[0, 2])
    d, e, f = float(m[1, 0]), float(m[1, 1]), float(m[1, 2])
    g, h, i = float(m[2, 0]), float(m[2, 1]), float(m[2, 2])
    A = e * i - f * h
    B = f * g - d * i
    C = d * h - e * g
    det = a * A + b * B + c * C
    if det == 0.0 or not math.isfinite(det):
        raise np.linalg.LinAlgError("singular 3x3 matrix")
    return (
        np.array(
            [
                [A, c * h - b * i, b * f - c * e],
                [B, a * i - c * g, c * d - a * f],
                [C, b * g - a * h, a * e - b * d],
            ]
        )
        / det
    )


def is_pd3(m: np.ndarray) -> bool:
    """Sylvester's criterion: all leading principal minors positive."""
    a, b, c = float(m[0, 0]), float(m[0, 1]), float(m[0, 2])
    e, f = float(m[1, 1]), float(m[1, 2])
    if not (a > 0.0):
        return False
    m2 = a * e - b * b
    if not (m2 > 0.0):
        return False
    return det3(m) > 0.0
