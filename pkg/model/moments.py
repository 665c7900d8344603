"""
Maximum-entropy bridges when the endpoint marginals are known only through
their first (and possibly second) moments.

The optimal joint law is an exponential tilt of the prior endpoint law,

    q0N(x0, xN) = p0N(x0, xN) exp(-1 - theta - lam x0 - mu xN - alpha x0^2 - beta xN^2)

theta is eliminated through the normalizer, so only the multipliers of the
constrained features are free. Two solvers are provided: damped Newton
ascent on the concave dual (authoritative) and the alternating
polynomial-root iteration for the mean-only case.
"""
import logging

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp

from .bridge import assemble_solution
from .errors import ConvergenceError, InfeasibleError, InvalidInputError
from .models import DualState, MomentSpec
from .oracle import FEASIBILITY_TOL, feasibility_residual, moment_constraints
from .prior import joint_endpoint_law, n_step_kernel

logger = logging.getLogger(__name__)

MOMENT_TOL = 1e-10
MOMENT_MAX_ITER = 10_000
MOMENT_MULTIPLIER_CAP = 500.0
ARMIJO_STEP = 1.0
ARMIJO_SHRINK = 0.5
ARMIJO_C = 1e-4
ROOT_RTOL = 1e-14

# multiplier name, endpoint, power of the node value
FEATURES = (
    ('lam', 'initial', 1),
    ('mu', 'final', 1),
    ('alpha', 'initial', 2),
    ('beta', 'final', 2),
)


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------

def validate_moment_spec(spec, n):
    """Structural checks; joint feasibility is settled by linear programming later"""
    if spec.order not in (1, 2):
        raise InvalidInputError(f"moment order must be 1 or 2, got {spec.order}")
    if spec.sides == 'none':
        raise InvalidInputError("a moment spec must constrain at least one endpoint")
    x = spec.values(n)
    if x.shape != (n,):
        raise InvalidInputError(f"expected {n} node values, got {x.size}")
    if not np.isfinite(x).all():
        raise InvalidInputError("node values must be finite")

    for side, m1, m2 in (('initial', spec.m0_1, spec.m0_2), ('final', spec.mN_1, spec.mN_2)):
        if m1 is None:
            if m2 is not None:
                raise InvalidInputError(f"{side} second moment given without a mean")
            continue
        if not x.min() < m1 < x.max():
            raise InvalidInputError(
                f"{side} mean {m1} must lie strictly between {x.min():g} and {x.max():g}"
            )
        if spec.order == 1 and m2 is not None:
            raise InvalidInputError(f"{side} second moment given for an order-1 spec")
        if spec.order == 2:
            if m2 is None:
                raise InvalidInputError(f"order 2 needs the {side} second moment")
            if m2 < m1 ** 2 - 1e-12:
                raise InvalidInputError(f"{side} second moment {m2} is below mean^2 = {m1 ** 2}")
    return spec


def _free_features(spec):
    """(name, endpoint, power, target) for every constrained feature"""
    targets = {
        ('initial', 1): spec.m0_1, ('final', 1): spec.mN_1,
        ('initial', 2): spec.m0_2, ('final', 2): spec.mN_2,
    }
    out = []
    for name, side, power in FEATURES:
        if power > spec.order:
            continue
        target = targets[(side, power)]
        if target is not None:
            out.append((name, side, power, float(target)))
    return out


def _feature_tables(n, x, features):
    X0 = np.broadcast_to(x[:, None], (n, n))
    XN = np.broadcast_to(x[None, :], (n, n))
    return np.array([(X0 if side == 'initial' else XN) ** power for _, side, power, _ in features])


def _check_feasible(p0N, spec):
    n = p0N.shape[0]
    support = p0N > 0
    constraints = moment_constraints(n, spec)
    A = np.array([np.ones(int(support.sum()))] + [con.coefficients[support] for con in constraints])
    b = np.array([1.0] + [con.target for con in constraints])
    residual = feasibility_residual(A, b)
    if residual > FEASIBILITY_TOL:
        raise InfeasibleError(
            f"moment targets are not achievable on the prior support (L1 residual {residual:.3e})",
            residual=residual,
        )


# ---------------------------------------------------------------------------
# Dual
# ---------------------------------------------------------------------------

def _tilt(log_p0N, F, eta):
    """Normalized tilt, log normalizer, feature means and covariance"""
    log_w = log_p0N - np.tensordot(eta, F, axes=1)
    log_Z = logsumexp(log_w)
    q = np.exp(log_w - log_Z)
    mean = np.tensordot(F, q, axes=2)
    flat = F.reshape(len(F), -1)
    cov = (flat * q.ravel()) @ flat.T - np.outer(mean, mean)
    return q, log_Z, mean, cov


def _dual_value(log_Z, eta, targets):
    return -log_Z - eta @ targets


def _to_state(features, eta, log_Z, targets, grad, iterations, converged, capped):
    values = {name: float(v) for (name, _, _, _), v in zip(features, eta)}
    return DualState(
        theta=float(log_Z - 1.0),
        objective=float(_dual_value(log_Z, eta, targets)),
        grad_norm=float(np.linalg.norm(grad)),
        iterations=iterations, converged=converged, capped=capped,
        **values,
    )


@np.errstate(divide='ignore')
def dual_objective_and_gradient(prior, dual, spec):
    """
    Dual value -log Z(eta) - eta . m and its gradient over the free
    multipliers, which is the vector of moment residuals (achieved - target).
    Non-finite tilts return (-inf, nan gradient).
    """
    features = _free_features(spec)
    x = spec.values(prior.n)
    F = _feature_tables(prior.n, x, features)
    eta = np.array([getattr(dual, name) for name, _, _, _ in features])
    targets = np.array([target for _, _, _, target in features])

    log_p0N = np.log(joint_endpoint_law(prior))
    with np.errstate(over='ignore', invalid='ignore'):
        q, log_Z, mean, _ = _tilt(log_p0N, F, eta)
    if not np.isfinite(log_Z) or not np.isfinite(mean).all():
        return float('-inf'), np.full(len(features), np.nan)
    return float(_dual_value(log_Z, eta, targets)), mean - targets


@np.errstate(divide='ignore')
def _solve_tilt(prior, spec, tol, max_iter, cap, method):
    validate_moment_spec(spec, prior.n)
    p0N = joint_endpoint_law(prior)
    _check_feasible(p0N, spec)

    features = _free_features(spec)
    F = _feature_tables(prior.n, spec.values(prior.n), features)
    targets = np.array([target for _, _, _, target in features])
    log_p0N = np.log(p0N)

    eta = np.zeros(len(features))
    q, log_Z, mean, cov = _tilt(log_p0N, F, eta)
    grad = mean - targets
    converged = capped = False
    iteration = 0

    while iteration < max_iter:
        if np.linalg.norm(grad) < tol:
            converged = True
            break
        iteration += 1

        if method == 'newton':
            damping = 1e-12 * max(1.0, np.trace(cov))
            direction = np.linalg.lstsq(cov + damping * np.eye(len(eta)), grad, rcond=None)[0]
        else:
            direction = grad

        value = _dual_value(log_Z, eta, targets)
        slope = grad @ direction
        step = ARMIJO_STEP
        while True:
            trial = eta + step * direction
            with np.errstate(over='ignore', invalid='ignore'):
                trial_q, trial_log_Z, trial_mean, trial_cov = _tilt(log_p0N, F, trial)
            trial_value = _dual_value(trial_log_Z, trial, targets)
            if np.isfinite(trial_value):
                if trial_value >= value + ARMIJO_C * step * slope:
                    break
                # near the optimum the dual is flat to rounding; accept a smaller residual
                flat = trial_value >= value - 1e-13 * (1.0 + abs(value))
                if flat and np.linalg.norm(trial_mean - targets) < np.linalg.norm(grad):
                    break
            step *= ARMIJO_SHRINK
            if step < 1e-20:
                break
        if step < 1e-20:
            logger.warning("moment ascent: line search failed at iteration %d (|grad|=%.3e)",
                           iteration, np.linalg.norm(grad))
            break

        largest = np.abs(trial).max()
        if largest > cap:
            trial = trial * (cap / largest)
            trial_q, trial_log_Z, trial_mean, trial_cov = _tilt(log_p0N, F, trial)
            capped = True

        eta, q, log_Z, mean, cov = trial, trial_q, trial_log_Z, trial_mean, trial_cov
        grad = mean - targets
        logger.debug("moment ascent iteration %d: |grad|=%.3e step=%g", iteration, np.linalg.norm(grad), step)

        if capped:
            logger.warning(
                "moment multipliers reached the cap %g; the targets sit on the boundary of the "
                "achievable set and the solution is near-degenerate (|grad|=%.3e)",
                cap, np.linalg.norm(grad),
            )
            break
    else:
        converged = np.linalg.norm(grad) < tol

    if not converged and not capped:
        raise ConvergenceError(
            f"moment ascent stopped after {iteration} iterations with |grad|={np.linalg.norm(grad):.3e}",
            iterations=iteration, final_gap=float(np.linalg.norm(grad)),
        )

    state = _to_state(features, eta, log_Z, targets, grad, iteration, converged, capped)
    logger.info("moment bridge (%s): %d iterations, |grad|=%.3e", method, iteration, state.grad_norm)
    return q, state


def mean_bridge_dual_ascent(prior, m0, mN, tol=MOMENT_TOL, max_iter=MOMENT_MAX_ITER,
                            cap=MOMENT_MULTIPLIER_CAP, method='newton', node_values=None):
    """
    Entropy-closest joint law with prescribed endpoint means, by ascent on
    the concave dual. method is 'newton' (damped Newton) or 'gradient'.

    Returns:
        (q0N, DualState)
    """
    spec = MomentSpec(order=1, m0_1=m0, mN_1=mN, node_values=node_values)
    return _solve_tilt(prior, spec, tol, max_iter, cap, method)


def mean_variance_bridge(prior, spec, tol=MOMENT_TOL, max_iter=MOMENT_MAX_ITER,
                         cap=MOMENT_MULTIPLIER_CAP, method='newton'):
    """Both first and second moments prescribed on the constrained endpoints"""
    if spec.order != 2:
        raise InvalidInputError("mean_variance_bridge needs an order-2 moment spec")
    return _solve_tilt(prior, spec, tol, max_iter, cap, method)


def half_bridge_moments(prior, side, spec, tol=MOMENT_TOL, max_iter=MOMENT_MAX_ITER,
                        cap=MOMENT_MULTIPLIER_CAP, method='newton'):
    """One endpoint constrained through its moments; the other side's multipliers stay 0"""
    if side not in ('initial', 'final'):
        raise InvalidInputError(f"side must be 'initial' or 'final', got {side!r}")
    if spec.sides != side:
        raise InvalidInputError(f"spec constrains {spec.sides!r}, expected only {side!r}")
    return _solve_tilt(prior, spec, tol, max_iter, cap, method)


def solve_moments(prior, spec, tol=MOMENT_TOL, max_iter=MOMENT_MAX_ITER,
                  cap=MOMENT_MULTIPLIER_CAP, method='newton'):
    """Dispatch a MomentSpec to the matching solver"""
    if spec.sides in ('initial', 'final'):
        return half_bridge_moments(prior, spec.sides, spec, tol, max_iter, cap, method)
    if spec.order == 2:
        return mean_variance_bridge(prior, spec, tol, max_iter, cap, method)
    return mean_bridge_dual_ascent(prior, spec.m0_1, spec.mN_1, tol, max_iter, cap, method,
                                   node_values=spec.node_values)


# ---------------------------------------------------------------------------
# Polynomial-root iteration (means only, integer node values)
# ---------------------------------------------------------------------------

def positive_root(coeffs):
    """
    The unique positive root of a polynomial whose coefficients (highest
    degree first) change sign exactly once.
    """
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float))
    if coeffs.size < 2:
        raise InvalidInputError("polynomial has no positive root")
    signs = np.sign(coeffs[coeffs != 0])
    changes = int((signs[1:] != signs[:-1]).sum())
    if changes != 1:
        raise InvalidInputError(f"expected exactly one sign change, found {changes}")

    # Cauchy bound on the modulus of every root
    upper = 1.0 + np.abs(coeffs[1:] / coeffs[0]).max()
    return float(bisect(lambda r: np.polyval(coeffs, r), 0.0, upper, xtol=1e-300, rtol=ROOT_RTOL, maxiter=10_000))


def _root_step(weights, x, target):
    """log of the positive root of sum_k w_k (x_k - m) r^(n - x_k)"""
    return float(np.log(positive_root(weights * (x - target))))


def mean_bridge_root_iteration(prior, m0, mN, tol=MOMENT_TOL, max_iter=MOMENT_MAX_ITER):
    """
    Alternate lam = A(mu) and mu = B(lam), each the log of the positive root
    of a polynomial built from the tilted prior endpoint law, until
    |d lam| + |d mu| < tol. The normalizer is recovered at the end.
    """
    spec = validate_moment_spec(MomentSpec(order=1, m0_1=m0, mN_1=mN), prior.n)
    if spec.sides != 'both':
        raise InvalidInputError("the root iteration needs both endpoint means")
    p0N = joint_endpoint_law(prior)
    _check_feasible(p0N, spec)
    x = spec.values(prior.n)

    lam = mu = 0.0
    for iteration in range(1, max_iter + 1):
        # h(mu, x0) = sum_xN p0N(x0, xN) exp(-mu xN)
        h = p0N @ np.exp(-mu * x)
        lam_next = _root_step(h, x, m0)
        # g(lam, xN) = sum_x0 p0N(x0, xN) exp(-lam x0)
        g = np.exp(-lam_next * x) @ p0N
        mu_next = _root_step(g, x, mN)

        change = abs(lam_next - lam) + abs(mu_next - mu)
        lam, mu = lam_next, mu_next
        logger.debug("root iteration %d: lam=%.12g mu=%.12g change=%.3e", iteration, lam, mu, change)
        if change < tol:
            break
    else:
        raise ConvergenceError(
            f"root iteration did not settle within {max_iter} cycles (last change {change:.3e})",
            iterations=max_iter, final_gap=change,
        )

    weights = p0N * np.exp(-lam * x)[:, None] * np.exp(-mu * x)[None, :]
    Z = weights.sum()
    q0N = weights / Z
    grad = np.array([x @ q0N.sum(axis=1) - m0, x @ q0N.sum(axis=0) - mN])
    state = DualState(
        lam=lam, mu=mu, theta=float(np.log(Z) - 1.0),
        objective=float(-np.log(Z) - lam * m0 - mu * mN),
        grad_norm=float(np.linalg.norm(grad)), iterations=iteration, converged=True,
    )
    logger.info("root iteration converged in %d cycles: lam=%.6g mu=%.6g", iteration, lam, mu)
    return q0N, state


# ---------------------------------------------------------------------------
# Moment solutions as bridges
# ---------------------------------------------------------------------------

@np.errstate(divide='ignore')
def moment_bridge_solution(prior, q0N, dual, spec, method='moments'):
    """
    Express an exponential-tilt solution through Schrödinger potentials,
    phihat(0, x) = c p0(x) exp(-lam x - alpha x^2) and
    phi(N, x) = exp(-mu x - beta x^2), so flow recovery and the exporters
    apply unchanged.
    """
    x = spec.values(prior.n)
    K = n_step_kernel(prior, 0, prior.N)
    log_phiN = -dual.mu * x - dual.beta * x ** 2
    shift = log_phiN.max()
    log_phiN = log_phiN - shift
    log_phihat0 = -1.0 - dual.theta + np.log(prior.p0) - dual.lam * x - dual.alpha * x ** 2 + shift

    phiN = np.exp(log_phiN)
    phihat0 = np.exp(log_phihat0)
    return assemble_solution(
        prior, np.asarray(q0N, dtype=float),
        phi0=K @ phiN, phiN=phiN, phihat0=phihat0, phihatN=phihat0 @ K,
        iterations=dual.iterations, final_gap=dual.grad_norm, method=method,
        converged=dual.converged,
    )
