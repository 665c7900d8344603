"""
solve command
Loads the inputs, runs the bridge (or moment) solver, recovers the flow and
writes marginals.csv, flows_t{t}.dot and solution.json.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import click

from middleware.error_handlers import exit_on_error
from model.bridge import imsbp_solve, recover_flow
from model.errors import InvalidInputError
from model.models import (
    BridgeSolution, DualState, FlowEvolution, Graph, MarkovPrior, MomentSpec, PartialMarginal, RunConfig,
)
from model.moments import moment_bridge_solution, solve_moments
from routes.loaders import load_graph, load_marginals, load_moments, load_prior, load_run_config
from utils.exporters import export_all

logger = logging.getLogger(__name__)


@dataclass
class SolveOutcome:
    """Everything a solve produced, for the command modules"""
    graph: Graph
    prior: MarkovPrior
    solution: BridgeSolution
    flow: FlowEvolution
    rho0: Optional[PartialMarginal] = None
    rhoN: Optional[PartialMarginal] = None
    moment_spec: Optional[MomentSpec] = None
    dual: Optional[DualState] = None


def resolve_run(config_path=None, graph=None, prior=None, marginals=None, moments=None,
                tol=None, max_iter=None, out=None, formats=None):
    """RunConfig from a configuration file, overridden by explicit flags"""
    run = load_run_config(config_path) if config_path else RunConfig(graph_path=graph, prior_spec=prior)

    if graph:
        run.graph_path = graph
    if prior:
        run.prior_spec = prior
    if marginals:
        run.marginal_spec, run.moment_spec = marginals, None
    if moments:
        run.moment_spec, run.marginal_spec = moments, None
    if tol is not None:
        run.tol = tol
    if max_iter is not None:
        run.max_iter = max_iter
    if out:
        run.output_dir = out
    if formats:
        run.output_formats = tuple(formats)

    if not run.graph_path or not run.prior_spec:
        raise InvalidInputError("a graph and a prior are required (--graph/--prior or --config)")
    if marginals and moments:
        raise InvalidInputError("give either --marginals or --moments, not both")
    if (run.marginal_spec is None) == (run.moment_spec is None):
        raise InvalidInputError("exactly one of marginals / moments is required")
    if run.tol is not None and run.tol <= 0:
        raise InvalidInputError(f"tol must be positive, got {run.tol}")
    return run


def run_solve(run, settings):
    """Solve one RunConfig with the given configuration class"""
    graph = load_graph(run.graph_path)
    prior = load_prior(run.prior_spec, graph,
                       perron_tol=settings.PERRON_TOL, perron_max_iter=settings.PERRON_MAX_ITER)
    logger.info("prior %s on %d nodes, horizon %d", prior.label, prior.n, prior.N)

    if run.marginal_spec is not None:
        rho0, rhoN = load_marginals(run.marginal_spec, graph.n)
        solution = imsbp_solve(
            prior, rho0, rhoN,
            tol=run.tol or settings.BRIDGE_TOL,
            max_iter=run.max_iter or settings.BRIDGE_MAX_ITER,
            stall_window=settings.BRIDGE_STALL_WINDOW,
        )
        outcome = SolveOutcome(graph, prior, solution, recover_flow(prior, solution), rho0=rho0, rhoN=rhoN)
    else:
        spec = load_moments(run.moment_spec, graph.n)
        q0N, dual = solve_moments(
            prior, spec,
            tol=run.tol or settings.MOMENT_TOL,
            max_iter=run.max_iter or settings.MOMENT_MAX_ITER,
            cap=settings.MOMENT_MULTIPLIER_CAP,
            method=settings.MOMENT_METHOD,
        )
        solution = moment_bridge_solution(prior, q0N, dual, spec)
        outcome = SolveOutcome(graph, prior, solution, recover_flow(prior, solution),
                               moment_spec=spec, dual=dual)
    return outcome


def format_summary(outcome):
    sol = outcome.solution
    q0, qN = sol.q0_star, sol.qN_star
    lines = [
        f"method:      {sol.method}",
        f"iterations:  {sol.iterations}",
        f"final gap:   {sol.final_gap:.3e}",
        f"KL(q||p):    {sol.kl_value:.10g}",
        "q0*:         " + ' '.join(f"{i + 1}:{v:.4f}" for i, v in enumerate(q0)),
        "qN*:         " + ' '.join(f"{i + 1}:{v:.4f}" for i, v in enumerate(qN)),
    ]
    if sol.contraction_bound is not None:
        lines.append(f"contraction: {sol.contraction_bound:.6g}")
    return '\n'.join(lines)


@click.command('solve')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='Run configuration JSON.')
@click.option('--graph', type=click.Path(dir_okay=False), help='Graph JSON.')
@click.option('--prior', type=click.Path(dir_okay=False), help='Prior spec JSON.')
@click.option('--marginals', type=click.Path(dir_okay=False), help='Partial marginal spec JSON.')
@click.option('--moments', type=click.Path(dir_okay=False), help='Moment spec JSON.')
@click.option('--tol', type=float, default=None, help='Stopping tolerance.')
@click.option('--max-iter', type=int, default=None, help='Iteration cap.')
@click.option('--out', type=click.Path(file_okay=False), default=None, help='Output directory.')
@click.option('--format', 'formats', type=click.Choice(['csv', 'json', 'dot']), multiple=True,
              help='Artifact formats (repeatable).')
@click.pass_obj
@exit_on_error
def solve_command(settings, config_path, graph, prior, marginals, moments, tol, max_iter, out, formats):
    """Solve a bridge and write its artifacts."""
    run = resolve_run(config_path, graph, prior, marginals, moments, tol, max_iter, out, formats)
    outcome = run_solve(run, settings)
    out_dir = run.output_dir or settings.OUTPUT_DIR
    written = export_all(
        outcome.solution, outcome.flow, out_dir,
        formats=run.output_formats or settings.OUTPUT_FORMATS,
        dual=outcome.dual, float_format=settings.CSV_FLOAT_FORMAT,
    )
    click.echo(format_summary(outcome))
    for path in written:
        click.echo(f"wrote {path}")
