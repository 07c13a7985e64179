"""Independent brute-force oracles the tests check the library against.

Everything here is deliberately written the slow, direct way (dense
matrices, literal formulas, plain loops) and shares no code with the
package internals.
"""

import math
import random

import numpy as np


def direct_loglik(y, X, groups, beta, v1, v2):
    """Gaussian log-density via dense covariance, slogdet and inv."""
    y = np.asarray(y, float)
    X = np.atleast_2d(np.asarray(X, float))
    labels, codes = np.unique(np.asarray(groups), return_inverse=True)
    Z = np.zeros((y.size, labels.size))
    Z[np.arange(y.size), codes] = 1.0
    V = v1 * (Z @ Z.T) + v2 * np.eye(y.size)
    _, logdet = np.linalg.slogdet(V)
    Vi = np.linalg.inv(V)
    r = y - X @ np.asarray(beta, float)
    return -0.5 * (y.size * math.log(2 * math.pi) + logdet + r @ Vi @ r)


def gls_beta(y, X, groups, v1, v2):
    y = np.asarray(y, float)
    X = np.atleast_2d(np.asarray(X, float))
    labels, codes = np.unique(np.asarray(groups), return_inverse=True)
    Z = np.zeros((y.size, labels.size))
    Z[np.arange(y.size), codes] = 1.0
    V = v1 * (Z @ Z.T) + v2 * np.eye(y.size)
    Vi = np.linalg.inv(V)
    return np.linalg.solve(X.T @ Vi @ X, X.T @ Vi @ y)


def grid_search_mixed(y, X, groups, stages=3, size=41):
    """Profiled-likelihood grid search over (V1, V2), beta by GLS.

    Returns (loglik, v1, v2, beta, v1_cell, v2_cell) where the cells are
    the final-stage grid spacings.
    """
    y = np.asarray(y, float)
    var_y = y.var()
    v1_lo, v1_hi = 0.0, 3.0 * var_y
    v2_lo, v2_hi = var_y / 100.0, 3.0 * var_y
    best = None
    dv1 = dv2 = None
    for _ in range(stages):
        v1_grid = np.linspace(v1_lo, v1_hi, size)
        v2_grid = np.linspace(v2_lo, v2_hi, size)
        for v1 in v1_grid:
            for v2 in v2_grid:
                beta = gls_beta(y, X, groups, v1, v2)
                ll = direct_loglik(y, X, groups, beta, v1, v2)
                if best is None or ll > best[0]:
                    best = (ll, v1, v2, beta)
        dv1 = v1_grid[1] - v1_grid[0]
        dv2 = v2_grid[1] - v2_grid[0]
        v1_lo = max(0.0, best[1] - dv1)
        v1_hi = best[1] + dv1
        v2_lo = max(var_y * 1e-6, best[2] - dv2)
        v2_hi = best[2] + dv2
    return best[0], best[1], best[2], best[3], dv1, dv2


def slow_block_bootstrap_drifts(values, block_size, n_boot, seed):
    """Pure-python moving-block resampler built on the stdlib RNG."""
    rng = random.Random(seed)
    values = list(values)
    n = len(values)
    n_blocks = n // block_size
    drifts = []
    for _ in range(n_boot):
        sample = []
        for _ in range(n_blocks):
            start = rng.randint(0, n - block_size)
            sample.extend(values[start:start + block_size])
        arr = np.array(sample)
        mean = arr.mean()
        drifts.append(100.0 * math.sqrt(((arr - mean) ** 2).mean()) / mean)
    return np.array(drifts)


def contract_bootstrap_drifts(values, block_size, n_boot, seed):
    """The documented resampler contract, re-stated literally.

    Uniform integer starts in [0, N - block_size] from a fresh
    default_rng(seed), floor(N/block) blocks per resample, percent drift
    of each concatenation.
    """
    g = np.random.default_rng(seed)
    values = np.asarray(values, float)
    n = values.size
    n_blocks = n // block_size
    drifts = np.empty(n_boot)
    starts = g.integers(0, n - block_size + 1, size=(n_boot, n_blocks))
    for i in range(n_boot):
        sample = np.concatenate([
            values[s:s + block_size] for s in starts[i]
        ])
        mean = sample.mean()
        drifts[i] = 100.0 * math.sqrt(((sample - mean) ** 2).mean()) / mean
    return drifts
