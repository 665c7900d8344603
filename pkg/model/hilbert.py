"""
Hilbert projective metric on the nonnegative orthant, plus the Birkhoff
contraction coefficient of a positive kernel.
"""
import numpy as np

from .errors import InvalidInputError


def hilbert_distance(x, y):
    """
    d_H(x, y) = log(max_i x_i/y_i / min_i x_i/y_i).

    Indices where both entries vanish are skipped; an index where exactly one
    vanishes puts the vectors on different faces of the cone and gives +inf.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InvalidInputError(f"shape mismatch {x.shape} vs {y.shape}")
    if (x < 0).any() or (y < 0).any():
        raise InvalidInputError("the Hilbert metric is defined on nonnegative vectors only")
    if not x.any() or not y.any():
        raise InvalidInputError("the Hilbert metric is undefined for the zero vector")

    x_pos, y_pos = x > 0, y > 0
    if (x_pos != y_pos).any():
        return float('inf')

    ratio = x[x_pos] / y[y_pos]
    return float(np.log(ratio.max()) - np.log(ratio.min()))


def projective_diameter(K):
    """Diameter of K applied to the positive cone: max over column pairs of d_H"""
    K = np.asarray(K, dtype=float)
    if (K <= 0).any():
        return float('inf')
    log_K = np.log(K)
    # log(K_ik K_jl / (K_jk K_il)) maximized over i, j and k, l
    spread = log_K[:, :, None] - log_K[:, None, :]
    return float((spread.max(axis=0) - spread.min(axis=0)).max())


def birkhoff_coefficient(K):
    """tanh(diameter / 4); 1 when the kernel has zeros"""
    diameter = projective_diameter(K)
    if not np.isfinite(diameter):
        return 1.0
    return float(np.tanh(diameter / 4.0))


def log_hilbert_distance(log_x, log_y):
    """
    d_H between exp(log_x) and exp(log_y) restricted to their common support.

    Entries equal to -inf are outside the support. Returns +inf when the
    supports do not intersect.
    """
    log_x = np.asarray(log_x, dtype=float)
    log_y = np.asarray(log_y, dtype=float)
    common = np.isfinite(log_x) & np.isfinite(log_y)
    if not common.any():
        return float('inf')
    diff = log_x[common] - log_y[common]
    return float(diff.max() - diff.min())
