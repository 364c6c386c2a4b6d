"""Euclidean projection onto the box-and-budget polytope.

The feasible region is ``{x in [0,1]^n : <x, z> <= 1}`` for a non-negative
energy vector ``z``. By the KKT conditions the projection of ``y`` is
``clamp(y - lam * z, 0, 1)`` where ``lam >= 0`` is zero when the plain box
clamp already satisfies the budget, and otherwise the multiplier that makes
the budget constraint active. The scalar ``lam`` is found by bisection: the
clamped budget usage is non-increasing in ``lam``, equals the box clamp's
usage at 0, and reaches 0 at ``max_i y_i / z_i``.
"""

from __future__ import annotations

import numpy as np

# Default tolerance for feasibility checks on projector output.
FEASIBILITY_TOL = 1e-9

_BRACKET_TOL = 1e-13   # stop when the lam bracket is this narrow
_RESIDUAL_TOL = 1e-12  # or when budget usage is within this of active
_MAX_BISECT = 200


def is_feasible(x, z, tol: float = FEASIBILITY_TOL) -> bool:
    """True when ``x`` is inside the box and budget up to ``tol``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(x < -tol) or np.any(x > 1.0 + tol):
        return False
    return float(x @ z) <= 1.0 + tol


def _usage(y, z, lam):
    return float(np.clip(y - lam * z, 0.0, 1.0) @ z)


def project_onto_feasible(y, z) -> np.ndarray:
    """Nearest point of ``{x in [0,1]^n : <x, z> <= 1}`` to ``y``.

    Returns the upper (feasible) end of the final bisection bracket, so the
    output never overshoots the budget by more than the residual tolerance.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if y.shape != z.shape or y.ndim != 1:
        raise ValueError("y and z must be 1-d vectors of equal length")
    if not np.all(np.isfinite(y)):
        raise ValueError("projection input must be finite")

    x = np.clip(y, 0.0, 1.0)
    if float(x @ z) <= 1.0:
        return x

    # Box clamp overshoots the budget, so some coordinate with z_i > 0 has
    # y_i > 0 and the budget is active at the optimum. lam_hi drives every
    # such coordinate to zero.
    pos = z > 0.0
    lo = 0.0
    hi = float(np.max(y[pos] / z[pos]))
    for _ in range(_MAX_BISECT):
        if hi - lo <= _BRACKET_TOL:
            break
        mid = 0.5 * (lo + hi)
        used = _usage(y, z, mid)
        if used > 1.0:
            lo = mid
        else:
            hi = mid
            if 1.0 - used <= _RESIDUAL_TOL:
                break
    return np.clip(y - hi * z, 0.0, 1.0)
