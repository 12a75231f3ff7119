"""Numeric tolerances used throughout the solver.

All thresholds are relative; they get multiplied by a scale factor
(max absolute diagonal entry of the matrix at hand) before use.
The KKT/certificate tolerance may be overridden per process through
the PPPA_TOL environment variable, or per call through function
arguments; the linear-algebra thresholds are fixed.
"""

import os

# Nonsingularity / zero-Schur-diagonal threshold (times scale).
TOL_PIVOT = 1e-10

# Positive-semidefiniteness slack for pivoted Cholesky (times scale).
TOL_PSD = 1e-9

# Residual threshold that forces a factor refresh (times scale).
TOL_FACTOR = 1e-8

# Default KKT / certificate tolerance (times 1 + ||q||_inf).
TOL_KKT = 1e-8

# Ratio-test positivity threshold (times ||pbar||_inf).
TOL_RATIO = 1e-12

# Kernel decision residual in dominance-vector search (times scale).
TOL_KERNEL = 1e-8

# Strict positivity threshold for dominance vectors.
TOL_D_POSITIVE = 1e-12

_SCALE_FLOOR = 1e-30


def default_kkt_tol() -> float:
    """KKT tolerance honoring the PPPA_TOL environment override."""
    raw = os.environ.get("PPPA_TOL")
    if raw is None:
        return TOL_KKT
    try:
        value = float(raw)
    except ValueError as exc:
        raise ValueError(f"PPPA_TOL is not a number: {raw!r}") from exc
    if value <= 0:
        raise ValueError(f"PPPA_TOL must be positive, got {value}")
    return value
