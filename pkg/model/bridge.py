"""
Schrödinger-bridge solvers on a Markov prior.

  - half_bridge_initial / half_bridge_final: one endpoint constrained
  - imsbp_solve: both endpoints known on node subsets, solved by the
    four-map fixed-point iteration on the phihat(0, .) ray
  - recover_flow: time-varying optimal transitions and edge flows
  - path-level views of a solution (path probability, conditional law)

The iteration is carried out on log-potentials so low-temperature kernels
whose entries underflow in products are still handled.
"""
import logging

import numpy as np
import pandas as pd
from scipy.special import logsumexp, rel_entr

from .errors import ConvergenceError, InconsistentSolutionError, InfeasibleError, InvalidInputError
from .hilbert import birkhoff_coefficient, log_hilbert_distance
from .models import BridgeSolution, FlowEvolution, PartialMarginal
from .prior import joint_endpoint_law, marginal, n_step_kernel

logger = logging.getLogger(__name__)

BRIDGE_TOL = 1e-12
BRIDGE_MAX_ITER = 10_000
BRIDGE_STALL_WINDOW = 50
MASS_TOL = 1e-9
FLOW_CONSISTENCY_TOL = 1e-8


# ---------------------------------------------------------------------------
# Inputs and small helpers
# ---------------------------------------------------------------------------

def partial_marginal(n, subset, values):
    """
    Validated PartialMarginal over 0-based nodes.

    A proper subset must carry strictly positive values with total mass in
    (0, 1). The full node set must carry a probability vector; zeros are then
    allowed (delta marginals) and the values are renormalized.
    """
    subset = [int(x) for x in subset]
    values = np.asarray(values, dtype=float)
    if not subset:
        raise InvalidInputError("a partial marginal needs at least one node")
    if len(subset) != len(values):
        raise InvalidInputError(f"{len(subset)} nodes but {len(values)} values")
    if len(set(subset)) != len(subset):
        raise InvalidInputError(f"repeated node in {subset}")
    if min(subset) < 0 or max(subset) >= n:
        raise InvalidInputError(f"node outside 0..{n - 1} in {subset}")
    if not np.isfinite(values).all() or (values < 0).any():
        raise InvalidInputError("marginal values must be finite and nonnegative")

    order = np.argsort(subset)
    subset = [subset[k] for k in order]
    values = values[order]
    mass = float(values.sum())

    if len(subset) == n:
        if abs(mass - 1.0) > MASS_TOL:
            raise InvalidInputError(f"a full marginal must sum to 1, got {mass:.12g}")
        return PartialMarginal(n=n, subset=tuple(subset), values=values / mass)

    if (values <= 0).any():
        raise InvalidInputError("values on a proper subset must be strictly positive")
    if mass >= 1.0:
        raise InvalidInputError(
            f"mass {mass:.12g} on a proper subset must be below 1; "
            "mass 1 is only allowed on the full node set"
        )
    return PartialMarginal(n=n, subset=tuple(subset), values=values)


def kl_divergence(q, p):
    """sum q log(q/p) with 0 log 0 = 0; +inf when q charges a zero of p"""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape:
        raise InvalidInputError(f"shape mismatch {q.shape} vs {p.shape}")
    return float(rel_entr(q, p).sum())


def _check_dims(prior, rho):
    if rho is not None and rho.n != prior.n:
        raise InvalidInputError(f"marginal over {rho.n} nodes used with a prior over {prior.n}")


def _log(x):
    with np.errstate(divide='ignore'):
        return np.log(x)


@np.errstate(divide='ignore')
def _log_kernel(prior):
    """log p(0, .; N, .) accumulated step by step in log space"""
    log_steps = _log(prior.steps)
    out = log_steps[0]
    for log_step in log_steps[1:]:
        out = logsumexp(out[:, :, None] + log_step[None, :, :], axis=1)
    return out


def _contraction_bound(K):
    if (K > 0).all():
        return birkhoff_coefficient(K) ** 2
    return None


def _require_support(rho, reference, what):
    """Known mass must sit where the prior can put mass"""
    charged = rho.dense() > 0
    bad = np.flatnonzero(charged & (reference <= 0))
    if bad.size:
        raise InfeasibleError(
            f"{what} marginal puts mass on nodes {(bad + 1).tolist()} that the prior never reaches",
            residual=float(rho.dense()[bad].sum()),
        )
    if not rho.is_full and reference[~rho.mask].sum() <= 0:
        raise InfeasibleError(
            f"{what} marginal leaves mass {1 - rho.mass:.6g} for nodes the prior never reaches",
            residual=1 - rho.mass,
        )


def assemble_solution(prior, q0N, phi0, phiN, phihat0, phihatN, **diagnostics):
    p0N = joint_endpoint_law(prior)
    return BridgeSolution(
        phi0=phi0, phiN=phiN, phihat0=phihat0, phihatN=phihatN,
        q0N=q0N, q0_star=q0N.sum(axis=1), qN_star=q0N.sum(axis=0),
        kl_value=kl_divergence(q0N, p0N),
        **diagnostics,
    )


# ---------------------------------------------------------------------------
# Half-bridges
# ---------------------------------------------------------------------------

def half_bridge_initial(prior, rho0):
    """
    Only the initial marginal is (partly) known. The prior kernel is kept and
    the unknown initial mass is spread proportionally to p0 on the complement.
    """
    _check_dims(prior, rho0)
    _require_support(rho0, prior.p0, 'initial')
    K = n_step_kernel(prior, 0, prior.N)

    if rho0.is_full:
        q0 = rho0.dense()
    else:
        c0 = (1.0 - rho0.mass) / prior.p0[~rho0.mask].sum()
        q0 = np.where(rho0.mask, rho0.dense(), c0 * prior.p0)

    ones = np.ones(prior.n)
    return assemble_solution(
        prior, q0[:, None] * K,
        phi0=ones, phiN=ones.copy(), phihat0=q0, phihatN=q0 @ K,
        iterations=0, final_gap=0.0, method='half_bridge_initial',
        contraction_bound=_contraction_bound(K),
    )


def half_bridge_final(prior, rhoN):
    """
    Only the final marginal is (partly) known. The reverse-time kernel is
    kept; phi(N, .) is rho_N / p_N on the known nodes and the constant c_N
    elsewhere.
    """
    _check_dims(prior, rhoN)
    pN = marginal(prior, prior.N)
    _require_support(rhoN, pN, 'final')
    K = n_step_kernel(prior, 0, prior.N)

    reached = pN > 0
    phiN = np.zeros(prior.n)
    phiN[reached] = rhoN.dense()[reached] / pN[reached]
    if not rhoN.is_full:
        cN = (1.0 - rhoN.mass) / pN[~rhoN.mask].sum()
        phiN[~rhoN.mask] = cN

    phi0 = K @ phiN
    q0N = prior.p0[:, None] * K * phiN[None, :]
    return assemble_solution(
        prior, q0N,
        phi0=phi0, phiN=phiN, phihat0=np.array(prior.p0), phihatN=pN,
        iterations=0, final_gap=0.0, method='half_bridge_final',
        contraction_bound=_contraction_bound(K),
    )


# ---------------------------------------------------------------------------
# Incomplete-marginal bridge
# ---------------------------------------------------------------------------

def _final_potential(log_phihatN, rhoN, log_rhoN):
    """D_N: phi(N, x) = rho_N(x) / phihat(N, x) on the known nodes, 1 elsewhere"""
    mask = rhoN.mask
    starved = mask & np.isneginf(log_phihatN) & np.isfinite(log_rhoN)
    if starved.any():
        raise InfeasibleError(
            f"final nodes {(np.flatnonzero(starved) + 1).tolist()} cannot be reached "
            "from the current initial support",
            residual=float(rhoN.dense()[starved].sum()),
        )
    log_phiN = np.zeros(rhoN.n)
    known = mask & np.isfinite(log_rhoN)
    log_phiN[known] = log_rhoN[known] - log_phihatN[known]
    log_phiN[mask & ~known] = -np.inf
    return log_phiN


def _initial_potential(log_phi0, rho0, log_rho0, log_p0):
    """D_0: phihat(0, x) = rho_0(x) / phi(0, x) on the known nodes, c0 p0(x) elsewhere"""
    mask = rho0.mask
    starved = mask & np.isneginf(log_phi0) & np.isfinite(log_rho0)
    if starved.any():
        raise InfeasibleError(
            f"initial nodes {(np.flatnonzero(starved) + 1).tolist()} cannot reach "
            "the constrained final nodes",
            residual=float(rho0.dense()[starved].sum()),
        )
    log_phihat0 = np.full(rho0.n, -np.inf)
    known = mask & np.isfinite(log_rho0)
    log_phihat0[known] = log_rho0[known] - log_phi0[known]

    if not rho0.is_full:
        free = ~mask
        log_weight = logsumexp(log_p0[free] + log_phi0[free])
        if np.isneginf(log_weight):
            raise InfeasibleError(
                f"the unknown initial mass {1 - rho0.mass:.6g} has nowhere to go",
                residual=1 - rho0.mass,
            )
        log_c0 = np.log1p(-rho0.mass) - log_weight
        log_phihat0[free] = log_c0 + log_p0[free]
    return log_phihat0


@np.errstate(divide='ignore')
def imsbp_solve(prior, rho0=None, rhoN=None, tol=BRIDGE_TOL, max_iter=BRIDGE_MAX_ITER,
                stall_window=BRIDGE_STALL_WINDOW):
    """
    Bridge with partially known initial and final marginals.

    Cycles phihat(0) -> phihat(N) -> phi(N) -> phi(0) -> phihat(0) until the
    Hilbert gap between successive phihat(0) iterates drops below tol. A side
    left as None dispatches to the matching half-bridge; full-space marginals
    give the classical bridge.

    Raises:
        InfeasibleError: known mass cannot be matched on the kernel support
        ConvergenceError: max_iter reached, or the gap stopped decreasing for
            stall_window consecutive iterations
    """
    if rho0 is None and rhoN is None:
        raise InvalidInputError("at least one endpoint marginal is required")
    if rhoN is None:
        return half_bridge_initial(prior, rho0)
    if rho0 is None:
        return half_bridge_final(prior, rhoN)
    _check_dims(prior, rho0)
    _check_dims(prior, rhoN)
    _require_support(rho0, prior.p0, 'initial')
    _require_support(rhoN, marginal(prior, prior.N), 'final')

    log_K = _log_kernel(prior)
    log_p0 = _log(prior.p0)
    log_rho0 = _log(rho0.dense())
    log_rhoN = _log(rhoN.dense())

    log_phihat0 = log_p0.copy()
    history = []
    best, since_best = float('inf'), 0
    converged = False

    for iteration in range(1, max_iter + 1):
        log_phihatN = logsumexp(log_K + log_phihat0[:, None], axis=0)
        log_phiN = _final_potential(log_phihatN, rhoN, log_rhoN)
        log_phi0 = logsumexp(log_K + log_phiN[None, :], axis=1)
        log_next = _initial_potential(log_phi0, rho0, log_rho0, log_p0)

        gap = log_hilbert_distance(log_next, log_phihat0)
        history.append(gap)
        log_phihat0 = log_next
        logger.debug("imsbp iteration %d: gap=%.3e", iteration, gap)

        if gap < tol:
            converged = True
            break
        if gap < best:
            best, since_best = gap, 0
        else:
            since_best += 1
            if since_best >= stall_window:
                raise ConvergenceError(
                    f"Hilbert gap stopped decreasing for {stall_window} iterations "
                    f"(best {best:.3e}); the constraints may be infeasible on this kernel",
                    iterations=iteration, final_gap=gap,
                )

    if not converged:
        raise ConvergenceError(
            f"no convergence within {max_iter} iterations (gap {history[-1]:.3e})",
            iterations=max_iter, final_gap=history[-1],
        )

    # final potentials from the last phihat(0, .) so the column constraints hold exactly
    log_phihatN = logsumexp(log_K + log_phihat0[:, None], axis=0)
    log_phiN = _final_potential(log_phihatN, rhoN, log_rhoN)
    if rhoN.is_full:
        pN = np.where(np.isfinite(log_phiN), marginal(prior, prior.N), -1.0)
        shift = log_phiN[int(np.argmax(pN))]
        log_phiN = log_phiN - shift
        log_phihat0 = log_phihat0 + shift
        log_phihatN = log_phihatN + shift
    log_phi0 = logsumexp(log_K + log_phiN[None, :], axis=1)

    q0N = np.exp(log_phihat0[:, None] + log_K + log_phiN[None, :])
    K = np.exp(log_K)
    solution = assemble_solution(
        prior, q0N,
        phi0=np.exp(log_phi0), phiN=np.exp(log_phiN),
        phihat0=np.exp(log_phihat0), phihatN=np.exp(log_phihatN),
        iterations=iteration, final_gap=history[-1], method='imsbp',
        gap_history=history, contraction_bound=_contraction_bound(K),
    )
    logger.info(
        "imsbp converged in %d iterations: gap=%.3e, mass=%.12f, KL=%.6g",
        iteration, solution.final_gap, q0N.sum(), solution.kl_value,
    )
    return solution


def complete_marginals(sol):
    """Most likely completion of both endpoint marginals (row and column sums of q0N)"""
    return sol.q0N.sum(axis=1), sol.q0N.sum(axis=0)


# ---------------------------------------------------------------------------
# Flow recovery and path-level views
# ---------------------------------------------------------------------------

def recover_flow(prior, sol):
    """
    Time-varying optimal transitions q*_ij(t) = phi(t+1, j) / phi(t, i) * p_ij(t)
    with phi(t, .) = Pi_t phi(t+1, .), started from phi(N, .) = sol.phiN.
    """
    n, N = prior.n, prior.N
    if sol.phiN.shape != (n,) or sol.q0N.shape != (n, n):
        raise InconsistentSolutionError(f"solution dimensions do not match a prior over {n} nodes")

    phi = np.empty((N + 1, n))
    phi[N] = sol.phiN
    for t in range(N - 1, -1, -1):
        phi[t] = prior.steps[t] @ phi[t + 1]

    transitions = np.empty((N, n, n))
    marginals = np.empty((N + 1, n))
    marginals[0] = sol.q0_star
    for t in range(N):
        alive = phi[t] > 0
        orphaned = ~alive & (marginals[t] > FLOW_CONSISTENCY_TOL)
        if orphaned.any():
            raise InconsistentSolutionError(
                f"phi({t}, .) vanishes at nodes {(np.flatnonzero(orphaned) + 1).tolist()} "
                "that carry mass"
            )
        transitions[t] = prior.steps[t]
        transitions[t, alive] = prior.steps[t, alive] * phi[t + 1][None, :] / phi[t, alive][:, None]
        marginals[t + 1] = marginals[t] @ transitions[t]

    mismatch = np.abs(marginals[N] - sol.qN_star).max()
    if mismatch > FLOW_CONSISTENCY_TOL:
        raise InconsistentSolutionError(
            f"propagated final marginal misses the solution's by {mismatch:.3e}; "
            "was the solution computed for this prior?"
        )

    edge_flows = marginals[:-1, :, None] * transitions
    return FlowEvolution(marginals=marginals, transitions=transitions, edge_flows=edge_flows, potentials=phi)


def solution_path_probability(prior, sol, path):
    """Q*(x) = phihat(0, x0) / p0(x0) * P(x) * phi(N, xN)"""
    path = [int(x) for x in path]
    if len(path) != prior.N + 1:
        raise InvalidInputError(f"a path must visit N+1={prior.N + 1} states, got {len(path)}")
    x0, xN = path[0], path[-1]
    if prior.p0[x0] <= 0:
        return 0.0

    prob = sol.phihat0[x0] * sol.phiN[xN]
    for t, (a, b) in enumerate(zip(path[:-1], path[1:])):
        prob *= prior.steps[t, a, b]
    return float(prob)


def _support_paths(prior, x0, xN):
    """Walks x0 -> xN with positive prior probability at every step"""
    reach = [np.zeros(prior.n, dtype=bool) for _ in range(prior.N + 1)]
    reach[prior.N][xN] = True
    for t in range(prior.N - 1, -1, -1):
        reach[t] = (prior.steps[t] > 0) @ reach[t + 1]

    paths = []

    def extend(prefix):
        t = len(prefix) - 1
        if t == prior.N:
            paths.append(tuple(prefix))
            return
        for nxt in np.flatnonzero((prior.steps[t, prefix[-1]] > 0) & reach[t + 1]):
            extend(prefix + [int(nxt)])

    if reach[0][x0]:
        extend([x0])
    return paths


def conditional_path_law(prior, sol, x0, xN):
    """
    Law of the whole path under the solution given (X0, XN) = (x0, xN).

    Returns a DataFrame with one row per path: columns x0..xN hold the
    visited nodes, 'probability' the conditional mass.
    """
    weight = sol.q0N[x0, xN]
    if weight <= 0:
        raise InvalidInputError(f"the solution gives zero mass to endpoints ({x0 + 1}, {xN + 1})")

    rows = []
    for path in _support_paths(prior, x0, xN):
        rows.append(list(path) + [solution_path_probability(prior, sol, path) / weight])
    columns = [f"x{t}" for t in range(prior.N + 1)] + ['probability']
    return pd.DataFrame(rows, columns=columns)
