"""Finite-state measures, Markov kernels and the elementary transforms.

Measures are plain 1-d float arrays indexed by state; kernels are square
2-d arrays whose row ``x`` is the law ``K(x, .)``. The ``as_*`` helpers
validate and return fresh read-only copies so downstream code can treat
them as immutable values.
"""

import numpy as np

from .errors import (
    DegenerateWeight,
    DimensionMismatch,
    NotProbability,
    NotStochastic,
)

#: absolute tolerance on row sums / total mass
MASS_TOL = 1e-12
#: smallest admissible Boltzmann-Gibbs normalizer
WEIGHT_FLOOR = 1e-300


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def as_signed(values):
    """Validate a finite signed vector."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("signed vector has non-finite entries")
    return _frozen(v)


def as_probability(weights, normalize=False):
    """Validate (and optionally renormalize) a probability vector.

    Parameters
    ----------
    weights : array_like
        Nonnegative weights, one per state.
    normalize : bool
        Divide by the total mass instead of requiring it to be 1.
    """
    w = as_signed(weights)
    if np.any(w < 0):
        raise NotProbability("probability weights must be nonnegative")
    total = w.sum()
    if normalize:
        if total <= WEIGHT_FLOOR:
            raise DegenerateWeight("cannot normalize a zero measure")
        return _frozen(w / total)
    if abs(total - 1.0) > MASS_TOL:
        raise NotProbability(f"weights sum to {total!r}, not 1")
    return w


def as_kernel(rows, stochastic=True):
    """Validate a nonnegative square matrix, row-stochastic if requested."""
    k = np.asarray(rows, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise DimensionMismatch(f"kernel must be square, got shape {k.shape}")
    if not np.all(np.isfinite(k)):
        raise ValueError("kernel has non-finite entries")
    if np.any(k < 0):
        i, j = np.argwhere(k < 0)[0]
        raise NotStochastic(f"kernel entry ({i}, {j}) is negative")
    if stochastic:
        sums = k.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > MASS_TOL)
        if bad.size:
            raise NotStochastic(f"kernel row {bad[0]} sums to {sums[bad[0]]:.15g}, not 1")
    return _frozen(k)


def as_generator(matrix):
    """Validate a Markov generator: off-diagonal >= 0, rows summing to 0."""
    q = np.asarray(matrix, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise DimensionMismatch(f"generator must be square, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("generator has non-finite entries")
    off = q - np.diag(np.diag(q))
    if np.any(off < 0):
        i, j = np.argwhere(off < 0)[0]
        raise NotStochastic(f"generator off-diagonal entry ({i}, {j}) is negative")
    sums = q.sum(axis=1)
    scale = max(1.0, np.abs(q).max(initial=0.0))
    bad = np.flatnonzero(np.abs(sums) > MASS_TOL * scale)
    if bad.size:
        raise NotStochastic(f"generator row {bad[0]} sums to {sums[bad[0]]:.15g}, not 0")
    return _frozen(q)


def _check_same_size(a, b):
    if a.shape != b.shape:
        raise DimensionMismatch(f"size mismatch: {a.shape} vs {b.shape}")


def boltzmann_gibbs(mu, g):
    """Reweight ``mu`` by the positive function ``g`` and renormalize.

    ``Psi_g(mu)_i = mu_i g_i / sum_j mu_j g_j``.
    """
    mu = np.asarray(mu, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_same_size(mu, g)
    w = mu * g
    total = w.sum()
    if not total > WEIGHT_FLOOR:
        raise DegenerateWeight(f"mu(g) = {total!r} is not positive")
    return w / total


def apply_kernel(mu, k):
    """Push a (signed) measure through a kernel: ``(mu K)_j = sum_i mu_i K_ij``."""
    mu = np.asarray(mu, dtype=float)
    k = np.asarray(k, dtype=float)
    if k.ndim != 2 or k.shape[0] != mu.shape[0]:
        raise DimensionMismatch(f"cannot apply kernel {k.shape} to vector {mu.shape}")
    return mu @ k


def tv_distance(mu, nu):
    """Total variation distance, ``0.5 * sum |mu - nu|``."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    _check_same_size(mu, nu)
    return 0.5 * float(np.abs(mu - nu).sum())


def tv_sup(mu, nu):
    """Total variation as ``sup |(mu - nu)(f)|`` over ``osc(f) <= 1``.

    On a finite space the sup is attained at an indicator function, so we
    enumerate all ``2**n`` of them. Only for checking `tv_distance` on small
    spaces.
    """
    d = np.asarray(mu, dtype=float) - np.asarray(nu, dtype=float)
    n = d.shape[0]
    if n > 16:
        raise ValueError("tv_sup enumerates subsets; state space too large")
    best = 0.0
    for mask in range(1 << n):
        sel = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        best = max(best, abs(d[sel].sum()))
    return best


def dobrushin(k):
    """Dobrushin contraction coefficient of a stochastic kernel.

    The largest total variation distance between two rows.
    """
    k = as_kernel(k, stochastic=True)
    diffs = np.abs(k[:, None, :] - k[None, :, :]).sum(axis=2)
    return 0.5 * float(diffs.max())


def min_row_overlap(k):
    """``min_{x,y} sum_z min(K(x,z), K(y,z))``, i.e. ``1 - dobrushin(k)``."""
    k = as_kernel(k, stochastic=True)
    return float(np.minimum(k[:, None, :], k[None, :, :]).sum(axis=2).min())


def doeblin_ratio(k):
    """Largest ``rho`` with ``K(x, .) >= rho K(y, .)`` for all ``x, y``."""
    k = as_kernel(k, stochastic=True)
    num = k[:, None, :]
    den = k[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    return float(min(1.0, r.min()))


def oscillation(f):
    """``max f - min f``."""
    f = np.asarray(f, dtype=float)
    if f.size == 0:
        return 0.0
    return float(f.max() - f.min())


def sup_norm(f):
    return float(np.abs(np.asarray(f, dtype=float)).max(initial=0.0))
