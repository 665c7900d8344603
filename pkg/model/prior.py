"""
Path-measure priors in Markov form.

Every prior is a MarkovPrior (initial law + one transition matrix per step),
so the bridge solvers only ever see p0 and the step matrices. Boltzmann
measures are converted with backward partition vectors M^k 1.
"""
import logging
from functools import reduce

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidInputError
from .graph import PERRON_MAX_ITER, PERRON_TOL, perron
from .models import MarkovPrior

logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
# below this temperature the partition vectors are accumulated in log space
LOG_DOMAIN_TEMPERATURE = 0.05


def _check_horizon(N):
    N = int(N)
    if N < 1:
        raise InvalidInputError(f"horizon N must be at least 1, got {N}")
    return N


def _fallback_row(g, i):
    """Uniform over outgoing edges, or stay put when there are none"""
    row = np.zeros(g.n)
    succ = g.successors(i)
    if len(succ):
        row[succ] = 1.0 / len(succ)
    else:
        row[i] = 1.0
    return row


def _log_backward_partitions(log_M, N):
    """log(M^k 1) for k = 0..N, each an n-vector (-inf where zero)"""
    n = log_M.shape[0]
    out = [np.zeros(n)]
    for _ in range(N):
        out.append(logsumexp(log_M + out[-1][None, :], axis=1))
    return out


def boltzmann_prior(g, T, N):
    """
    Markov form of the Boltzmann path measure exp(-total length / T) / Z(T).

    Args:
        g: Graph
        T: temperature, strictly positive
        N: horizon (number of steps)

    Returns:
        MarkovPrior whose path probabilities equal the Boltzmann weights
    """
    T = float(T)
    if not np.isfinite(T) or T <= 0:
        raise InvalidInputError(f"temperature must be positive, got {T}")
    N = _check_horizon(N)

    with np.errstate(divide='ignore'):
        log_M = np.where(g.A > 0, -g.L / T, -np.inf)

    if T < LOG_DOMAIN_TEMPERATURE:
        with np.errstate(divide='ignore'):
            log_b = _log_backward_partitions(log_M, N)
    else:
        M = np.exp(log_M)
        b = [np.ones(g.n)]
        for _ in range(N):
            b.append(M @ b[-1])
        with np.errstate(divide='ignore'):
            log_b = [np.log(vec) for vec in b]

    if not np.isfinite(log_b[N]).any():
        raise InvalidInputError(f"the graph has no walk of length {N}; Z(T) = 0")

    p0 = np.exp(log_b[N] - logsumexp(log_b[N]))

    steps = np.empty((N, g.n, g.n))
    for t in range(N):
        ahead, here = log_b[N - t - 1], log_b[N - t]
        for i in range(g.n):
            if np.isfinite(here[i]):
                row = np.exp(log_M[i] + ahead - here[i])
                steps[t, i] = row / row.sum()
            else:
                steps[t, i] = _fallback_row(g, i)

    logger.debug("boltzmann prior: n=%d N=%d T=%g log Z=%.6g", g.n, N, T, logsumexp(log_b[N]))
    return MarkovPrior(n=g.n, N=N, p0=p0, steps=steps, kind='boltzmann', label=f"boltzmann T={T:g}")


def ruelle_bowen_prior(g, N, tol=PERRON_TOL, max_iter=PERRON_MAX_ITER):
    """Maximal-entropy-rate walk: r_ij = v_j a_ij / (lambda v_i), started from nu = u * v"""
    N = _check_horizon(N)
    lam, u, v = perron(g, tol=tol, max_iter=max_iter)

    R = g.A * v[None, :] / (lam * v[:, None])
    R = R / R.sum(axis=1, keepdims=True)
    nu = u * v
    nu = nu / nu.sum()

    steps = np.broadcast_to(R, (N, g.n, g.n))
    logger.debug("ruelle-bowen prior: lambda_A=%.12g", lam)
    return MarkovPrior(n=g.n, N=N, p0=nu, steps=steps, kind='ruelle_bowen', label='ruelle-bowen')


def custom_markov_prior(p0, steps, N=None):
    """
    Wrap a user-supplied Markov chain.

    steps is either an (N, n, n) stack or one n x n matrix repeated N times.
    """
    p0 = np.asarray(p0, dtype=float)
    steps = np.asarray(steps, dtype=float)
    if p0.ndim != 1 or p0.size < 2:
        raise InvalidInputError("p0 must be a vector over at least 2 states")
    n = p0.size

    if steps.ndim == 2:
        if N is None:
            raise InvalidInputError("a single transition matrix needs an explicit horizon N")
        steps = np.broadcast_to(steps, (_check_horizon(N),) + steps.shape)
    if steps.ndim != 3 or steps.shape[1:] != (n, n):
        raise InvalidInputError(f"steps must have shape (N, {n}, {n}), got {steps.shape}")
    if N is not None and steps.shape[0] != int(N):
        raise InvalidInputError(f"expected {N} transition matrices, got {steps.shape[0]}")
    _check_horizon(steps.shape[0])

    if (p0 < 0).any() or abs(p0.sum() - 1.0) > STOCHASTIC_TOL:
        raise InvalidInputError("p0 must be a probability vector")
    if (steps < 0).any():
        raise InvalidInputError("transition matrices must be nonnegative")
    row_error = np.abs(steps.sum(axis=2) - 1.0).max()
    if row_error > STOCHASTIC_TOL:
        raise InvalidInputError(f"transition rows must sum to 1 (worst deviation {row_error:.3g})")

    return MarkovPrior(n=n, N=steps.shape[0], p0=p0, steps=steps, kind='custom', label='custom')


def n_step_kernel(prior, s, t):
    """p(s, x_s; t, x_t) as the product of the step matrices s..t-1"""
    if not (0 <= s < t <= prior.N):
        raise InvalidInputError(f"need 0 <= s < t <= {prior.N}, got s={s}, t={t}")
    return reduce(np.matmul, prior.steps[s:t])


def marginal(prior, t):
    """Law of X(t) under the prior"""
    if not (0 <= t <= prior.N):
        raise InvalidInputError(f"time {t} outside 0..{prior.N}")
    if t == 0:
        return np.array(prior.p0)
    return prior.p0 @ n_step_kernel(prior, 0, t)


def joint_endpoint_law(prior):
    """p0N(x0, xN) = p0(x0) p(0, x0; N, xN)"""
    return prior.p0[:, None] * n_step_kernel(prior, 0, prior.N)


def reverse_kernel(prior, x_n=None):
    """
    Reverse-time kernel pbar(N, xN; 0, x0), rows indexed by xN.

    Rows where p_N(xN) = 0 are undefined and hold NaN. Passing x_n returns
    that single row and raises if it is undefined.
    """
    joint = joint_endpoint_law(prior)
    pN = joint.sum(axis=0)

    if x_n is not None:
        if pN[x_n] <= 0:
            raise InvalidInputError(f"reverse kernel row {x_n} is undefined: p_N = 0 there")
        return joint[:, x_n] / pN[x_n]

    out = np.full((prior.n, prior.n), np.nan)
    defined = pN > 0
    out[defined] = (joint[:, defined] / pN[defined]).T
    return out


def path_probability(prior, path):
    """p0(x0) * prod_t Pi_t[x_t, x_{t+1}]; zero for paths using an absent edge"""
    path = [int(x) for x in path]
    if len(path) != prior.N + 1:
        raise InvalidInputError(f"a path must visit N+1={prior.N + 1} states, got {len(path)}")
    if min(path) < 0 or max(path) >= prior.n:
        raise InvalidInputError(f"path {path} has a state outside 0..{prior.n - 1}")

    prob = prior.p0[path[0]]
    for t, (a, b) in enumerate(zip(path[:-1], path[1:])):
        prob *= prior.steps[t, a, b]
    return float(prob)


def prior_from_spec(g, spec, perron_tol=PERRON_TOL, perron_max_iter=PERRON_MAX_ITER):
    """Build a prior from a validated prior document (see PriorSpecSchema)"""
    kind = spec['type']
    if kind == 'boltzmann':
        return boltzmann_prior(g, spec['T'], spec['N'])
    if kind == 'ruelle_bowen':
        return ruelle_bowen_prior(g, spec['N'], tol=perron_tol, max_iter=perron_max_iter)
    if kind == 'custom':
        prior = custom_markov_prior(spec['p0'], spec['steps'], spec.get('N'))
        if prior.n != g.n:
            raise InvalidInputError(f"custom prior has {prior.n} states but the graph has {g.n} nodes")
        return prior
    raise InvalidInputError(f"unknown prior type {kind!r}")
