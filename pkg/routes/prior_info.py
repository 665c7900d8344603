"""
prior-info command
Prints the Perron data of the graph and the marginals of a prior.
"""
import click
import numpy as np
import pandas as pd

from middleware.error_handlers import exit_on_error
from model.graph import is_strongly_connected, perron
from model.prior import marginal
from routes.loaders import load_graph, load_prior, load_run_config


def prior_marginals_frame(prior):
    """Rows t = 0..N, columns node labels"""
    rows = np.array([marginal(prior, t) for t in range(prior.N + 1)])
    return pd.DataFrame(rows, columns=[str(i + 1) for i in range(prior.n)])


@click.command('prior-info')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='Run configuration JSON.')
@click.option('--graph', type=click.Path(dir_okay=False), help='Graph JSON.')
@click.option('--prior', type=click.Path(dir_okay=False), help='Prior spec JSON.')
@click.pass_obj
@exit_on_error
def prior_info_command(settings, config_path, graph, prior):
    """Print lambda_A, the topological entropy and the prior marginals."""
    if config_path:
        run = load_run_config(config_path)
        graph = graph or run.graph_path
        prior = prior or run.prior_spec
    if not graph:
        raise click.UsageError('a graph is required (--graph or --config)')

    g = load_graph(graph)
    click.echo(f"nodes: {g.n}, edges: {len(g.edges)}")
    if is_strongly_connected(g):
        lam, _, _ = perron(g, tol=settings.PERRON_TOL, max_iter=settings.PERRON_MAX_ITER)
        click.echo(f"lambda_A: {lam:.12g}")
        click.echo(f"H_G:      {np.log(lam):.12g}")
    else:
        click.echo("graph is not strongly connected: no Perron data")

    if prior:
        p = load_prior(prior, g, perron_tol=settings.PERRON_TOL, perron_max_iter=settings.PERRON_MAX_ITER)
        click.echo(f"prior: {p.label}, N={p.N}")
        click.echo(prior_marginals_frame(p).to_string(float_format=lambda v: f"{v:.4f}"))
