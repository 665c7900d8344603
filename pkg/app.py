"""
netbridge command line
    python app.py solve --config data/figure3_boltzmann_T0.01.json --out out/
    python app.py verify --config data/figure5_source_sink.json
    python app.py prior-info --graph data/figure5_graph.json --prior data/figure5_rb_prior.json
"""
import logging

import click

from config import get_config
from routes.prior_info import prior_info_command
from routes.solve import solve_command
from routes.verify import verify_command
from utils.logger import configure_logging

logger = logging.getLogger(__name__)


@click.group()
@click.option('--env', type=click.Choice(['development', 'testing', 'production']), default=None,
              help='Configuration environment (default: $NETBRIDGE_ENV or development).')
@click.pass_context
def cli(ctx, env):
    """Schrodinger bridges on directed graphs with incomplete marginals."""
    settings = get_config(env)
    configure_logging(settings)
    ctx.obj = settings
    logger.debug("using %s", settings.__name__)


cli.add_command(solve_command)
cli.add_command(verify_command)
cli.add_command(prior_info_command)


if __name__ == '__main__':
    cli()
