"""Pure-Python/numpy versions of the hot kernels.

Used when the compiled extension is unavailable, or when
``BOUNDSOL_KERNELS=python`` is set. Signatures match ``_ckernels``.
"""
import numpy as np


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system by forward elimination and back substitution.

    Row ``i`` reads ``lower[i]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1] = rhs[i]``;
    ``lower[0]`` and ``upper[-1]`` are ignored. No pivoting, so the matrix
    should be diagonally dominant (true for every Jacobian built here).
    """
    n = len(diag)
    cp = [0.0] * n
    dp = [0.0] * n
    denom = float(diag[0])
    if denom == 0.0:
        raise ZeroDivisionError("zero pivot in row 0")
    cp[0] = float(upper[0]) / denom if n > 1 else 0.0
    dp[0] = float(rhs[0]) / denom
    for i in range(1, n):
        li = float(lower[i])
        denom = float(diag[i]) - li * cp[i - 1]
        if denom == 0.0:
            raise ZeroDivisionError(f"zero pivot in row {i}")
        cp[i] = (float(upper[i]) / denom) if i < n - 1 else 0.0
        dp[i] = (float(rhs[i]) - li * dp[i - 1]) / denom
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def second_difference(u, h):
    """Central second difference along the last axis with zero end values."""
    u = np.asarray(u, dtype=float)
    out = -2.0 * u
    out[..., 1:] += u[..., :-1]
    out[..., :-1] += u[..., 1:]
    out /= h * h
    return out


def laplacian5(u, h):
    """Five-point Laplacian of a 2-D interior array with zero boundary."""
    u = np.asarray(u, dtype=float)
    out = -4.0 * u
    out[1:, :] += u[:-1, :]
    out[:-1, :] += u[1:, :]
    out[:, 1:] += u[:, :-1]
    out[:, :-1] += u[:, 1:]
    out /= h * h
    return out
