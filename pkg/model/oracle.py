"""
Brute-force reference solvers for small instances.

brute_force_bridge projects a joint law onto an affine constraint set in
relative entropy by solving the convex dual directly; brute_force_paths
tabulates every path of a Markov prior. feasible_perturbations samples the
constraint set around a candidate, so optimality can be checked without
assuming the exponential-tilt form of the minimizer. All of it is meant for
certifying the main solvers, not for speed.
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.linalg import null_space
from scipy.optimize import linprog, minimize
from scipy.special import logsumexp

from .errors import ConvergenceError, InfeasibleError, InstanceTooLargeError, InvalidInputError

logger = logging.getLogger(__name__)

ORACLE_MAX_CELLS = 400
ORACLE_MAX_PATHS = 10 ** 6
ORACLE_TOL = 1e-10
FEASIBILITY_TOL = 1e-9
ZERO_TARGET = 1e-15


@dataclass(frozen=True)
class JointConstraint:
    """sum(coefficients * q) == target for a joint law q over (x0, xN)"""
    coefficients: np.ndarray
    target: float
    label: str = ''


def marginal_constraints(n, rho0=None, rhoN=None):
    """One row-sum constraint per known initial node, one column-sum per known final node"""
    constraints = []
    for rho, axis in ((rho0, 0), (rhoN, 1)):
        if rho is None:
            continue
        for node, value in zip(rho.subset, rho.values):
            C = np.zeros((n, n))
            if axis == 0:
                C[node, :] = 1.0
            else:
                C[:, node] = 1.0
            side = 'initial' if axis == 0 else 'final'
            constraints.append(JointConstraint(C, float(value), f"{side}[{node + 1}]"))
    return constraints


def moment_constraints(n, spec):
    """Linear moment constraints for a MomentSpec"""
    x = spec.values(n)
    X0 = np.broadcast_to(x[:, None], (n, n))
    XN = np.broadcast_to(x[None, :], (n, n))
    pairs = [
        (X0, spec.m0_1, 'initial mean'),
        (XN, spec.mN_1, 'final mean'),
    ]
    if spec.order == 2:
        pairs += [
            (X0 ** 2, spec.m0_2, 'initial second moment'),
            (XN ** 2, spec.mN_2, 'final second moment'),
        ]
    return [JointConstraint(np.array(C), float(m), label) for C, m, label in pairs if m is not None]


def feasibility_residual(A_eq, b_eq):
    """
    Smallest L1 violation of A_eq q = b_eq over q >= 0, by linear programming.
    Zero (up to solver precision) means feasible.
    """
    A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.asarray(b_eq, dtype=float)
    rows, cols = A_eq.shape
    # variables: q, slack+, slack-
    A = np.hstack([A_eq, np.eye(rows), -np.eye(rows)])
    c = np.concatenate([np.zeros(cols), np.ones(2 * rows)])
    result = linprog(c, A_eq=A, b_eq=b_eq, bounds=(0, None), method='highs')
    if result.status != 0:
        raise InfeasibleError(f"feasibility program failed: {result.message}")
    return float(result.fun)


def _reduce_support(support, constraints):
    """Drop cells forced to zero by sign-definite constraints with target 0"""
    support = support.copy()
    changed = True
    while changed:
        changed = False
        for con in constraints:
            if abs(con.target) > ZERO_TARGET:
                continue
            coeffs = con.coefficients[support]
            if (coeffs >= 0).all() or (coeffs <= 0).all():
                forced = support & (con.coefficients != 0)
                if forced.any():
                    support &= ~forced
                    changed = True
    return support


def brute_force_bridge(p0N, constraints=(), max_cells=ORACLE_MAX_CELLS, tol=ORACLE_TOL):
    """
    argmin_q sum q log(q / p0N) subject to sum q = 1 and the given linear
    equalities.

    The minimizer is an exponential tilt of p0N; its multipliers solve the
    smooth convex dual log Z(eta) + eta . b, minimized with L-BFGS and then
    polished with least-squares Newton steps.
    """
    p0N = np.asarray(p0N, dtype=float)
    if p0N.size > max_cells:
        raise InstanceTooLargeError(f"{p0N.size} cells exceed the oracle cap of {max_cells}")
    if (p0N < 0).any() or abs(p0N.sum() - 1.0) > FEASIBILITY_TOL:
        raise InvalidInputError("p0N must be a probability table")

    constraints = list(constraints)
    support = _reduce_support(p0N > 0, constraints)
    if not support.any():
        raise InfeasibleError("the constraints force every cell to zero", residual=1.0)

    cells = int(support.sum())
    C = np.array([con.coefficients[support] for con in constraints]).reshape(len(constraints), cells)
    b = np.array([con.target for con in constraints])

    residual = feasibility_residual(np.vstack([np.ones(cells), C]), np.concatenate([[1.0], b]))
    if residual > FEASIBILITY_TOL:
        raise InfeasibleError(f"constraints are infeasible on the prior support (L1 residual {residual:.3e})",
                              residual=residual)

    log_p = np.log(p0N[support])

    def tilt(eta):
        log_w = log_p - eta @ C
        return np.exp(log_w - logsumexp(log_w)), logsumexp(log_w)

    def dual(eta):
        q, log_Z = tilt(eta)
        return log_Z + eta @ b, b - C @ q

    eta = np.zeros(len(constraints))
    if len(constraints):
        result = minimize(dual, eta, jac=True, method='L-BFGS-B',
                          options={'maxiter': 10_000, 'gtol': tol, 'ftol': 1e-15})
        eta = result.x
        for _ in range(50):
            value, grad = dual(eta)
            if np.abs(grad).max() < tol:
                break
            q, _ = tilt(eta)
            mean = C @ q
            cov = (C * q) @ C.T - np.outer(mean, mean)
            step = np.linalg.lstsq(cov, grad, rcond=None)[0]
            scale = 1.0
            while scale > 1e-12 and dual(eta - scale * step)[0] > value + 1e-16:
                scale *= 0.5
            eta = eta - scale * step

    q_support, _ = tilt(eta)
    q = np.zeros_like(p0N)
    q[support] = q_support

    violation = np.abs(C @ q_support - b).max() if len(constraints) else 0.0
    if violation > 1e-7:
        raise ConvergenceError(f"oracle stopped with constraint violation {violation:.3e}",
                               final_gap=violation)
    logger.debug("oracle: %d constraints, violation %.3e", len(constraints), violation)
    return q


def feasible_perturbations(q, constraints=(), size=1000, seed=0):
    """
    Random joint laws that satisfy the same linear constraints as q.

    Each sample is q + t * d with d a random direction in the null space of
    the constraint rows (normalization included) over the support of q, and
    t drawn uniformly up to the largest step that keeps every cell
    nonnegative.

    Returns:
        array of shape (size, *q.shape); empty when q is the only feasible point
    """
    q = np.asarray(q, dtype=float)
    support = q > 0
    rows = [np.ones(int(support.sum()))] + [con.coefficients[support] for con in constraints]
    basis = null_space(np.vstack(rows))
    if basis.shape[1] == 0:
        return np.empty((0,) + q.shape)

    rng = np.random.default_rng(seed)
    base = q[support]
    directions = rng.standard_normal((size, basis.shape[1])) @ basis.T
    with np.errstate(divide='ignore'):
        reach = np.where(directions < 0, base / -directions, np.inf).min(axis=1)
    steps = rng.uniform(0.0, 1.0, size) * reach

    samples = np.zeros((size,) + q.shape)
    samples[:, support] = np.clip(base + steps[:, None] * directions, 0.0, None)
    return samples


def brute_force_paths(prior, conditioning=None, max_paths=ORACLE_MAX_PATHS):
    """
    Every path of the prior with its probability.

    Args:
        prior: MarkovPrior
        conditioning: optional (x0, xN); the table is then restricted to paths
            with those endpoints and renormalized

    Returns:
        DataFrame with columns x0..xN (0-based nodes) and 'probability'
    """
    n, N = prior.n, prior.N
    if n ** (N + 1) > max_paths:
        raise InstanceTooLargeError(f"{n}^{N + 1} paths exceed the cap of {int(max_paths)}")

    paths = np.array(list(itertools.product(range(n), repeat=N + 1)), dtype=np.int64)
    prob = prior.p0[paths[:, 0]].copy()
    for t in range(N):
        prob *= prior.steps[t, paths[:, t], paths[:, t + 1]]

    table = pd.DataFrame(paths, columns=[f"x{t}" for t in range(N + 1)])
    table['probability'] = prob

    if conditioning is not None:
        x0, xN = conditioning
        table = table[(table['x0'] == x0) & (table[f"x{N}"] == xN)].reset_index(drop=True)
        total = table['probability'].sum()
        if total <= 0:
            raise InvalidInputError(f"the prior gives zero mass to endpoints ({x0 + 1}, {xN + 1})")
        table['probability'] = table['probability'] / total
    return table
