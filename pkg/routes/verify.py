"""
verify command
Solves a run and re-solves the same problem with the brute-force oracle;
exits 0 only when the two joint laws agree.
"""
import logging

import click
import numpy as np

from middleware.error_handlers import EXIT_CONVERGENCE, exit_on_error
from model.bridge import kl_divergence
from model.oracle import brute_force_bridge, marginal_constraints, moment_constraints
from model.prior import joint_endpoint_law
from routes.solve import resolve_run, run_solve

logger = logging.getLogger(__name__)


def compare_with_oracle(outcome, max_cells):
    """(max |q0N - oracle|, solver KL, oracle KL)"""
    prior = outcome.prior
    p0N = joint_endpoint_law(prior)
    if outcome.moment_spec is not None:
        constraints = moment_constraints(prior.n, outcome.moment_spec)
    else:
        constraints = marginal_constraints(prior.n, outcome.rho0, outcome.rhoN)

    reference = brute_force_bridge(p0N, constraints, max_cells=max_cells)
    deviation = float(np.abs(outcome.solution.q0N - reference).max())
    return deviation, outcome.solution.kl_value, kl_divergence(reference, p0N)


@click.command('verify')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='Run configuration JSON.')
@click.option('--graph', type=click.Path(dir_okay=False), help='Graph JSON.')
@click.option('--prior', type=click.Path(dir_okay=False), help='Prior spec JSON.')
@click.option('--marginals', type=click.Path(dir_okay=False), help='Partial marginal spec JSON.')
@click.option('--moments', type=click.Path(dir_okay=False), help='Moment spec JSON.')
@click.option('--tol', type=float, default=None, help='Stopping tolerance.')
@click.option('--max-iter', type=int, default=None, help='Iteration cap.')
@click.pass_obj
@exit_on_error
def verify_command(settings, config_path, graph, prior, marginals, moments, tol, max_iter):
    """Check a solve against the brute-force oracle."""
    run = resolve_run(config_path, graph, prior, marginals, moments, tol, max_iter)
    outcome = run_solve(run, settings)
    deviation, kl_solver, kl_oracle = compare_with_oracle(outcome, settings.ORACLE_MAX_CELLS)

    click.echo(f"max |q0N - oracle|: {deviation:.3e}")
    click.echo(f"KL solver:          {kl_solver:.12g}")
    click.echo(f"KL oracle:          {kl_oracle:.12g}")
    if deviation >= settings.VERIFY_TOLERANCE:
        logger.error("solver and oracle disagree by %.3e (tolerance %.1e)", deviation, settings.VERIFY_TOLERANCE)
        raise SystemExit(EXIT_CONVERGENCE)
    click.echo("OK")
