"""
Input loading for the command modules
Every loader accepts a file path or an inline document and converts the
1-based node labels of the documents to the 0-based indices of the model.
"""
import logging
import os

from middleware.validators import (
    GraphSchema, MarginalSpecSchema, MomentSpecSchema, PriorSpecSchema, RunConfigSchema, validate_spec,
)
from model.bridge import partial_marginal
from model.errors import InvalidInputError
from model.graph import build_graph
from model.models import MomentSpec, RunConfig
from model.moments import validate_moment_spec
from model.prior import prior_from_spec

logger = logging.getLogger(__name__)


@validate_spec(GraphSchema)
def load_graph(validated_data):
    """Graph from {"n", "edges": [{"from", "to", "length"?}]}"""
    edges = [(e['source'], e['target'], e['length']) for e in validated_data['edges']]
    graph = build_graph(validated_data['n'], edges)
    logger.debug("loaded graph: n=%d, %d edges", graph.n, len(graph.edges))
    return graph


@validate_spec(PriorSpecSchema)
def load_prior(validated_data, graph, **perron_options):
    """MarkovPrior on graph from a prior spec"""
    return prior_from_spec(graph, validated_data, **perron_options)


def _side(n, side):
    if side is None:
        return None
    nodes = side['nodes']
    if max(nodes) > n:
        raise InvalidInputError(f"marginal node {max(nodes)} outside 1..{n}")
    return partial_marginal(n, [node - 1 for node in nodes], side['values'])


@validate_spec(MarginalSpecSchema)
def load_marginals(validated_data, n):
    """(rho0, rhoN) PartialMarginals; a missing side is None"""
    return _side(n, validated_data['initial']), _side(n, validated_data['final'])


@validate_spec(MomentSpecSchema)
def load_moments(validated_data, n):
    """MomentSpec from a moment spec document"""
    initial = validated_data['initial'] or {}
    final = validated_data['final'] or {}
    node_values = validated_data['node_values']
    spec = MomentSpec(
        order=validated_data['order'],
        m0_1=initial.get('mean'),
        mN_1=final.get('mean'),
        m0_2=initial.get('second_moment'),
        mN_2=final.get('second_moment'),
        node_values=tuple(node_values) if node_values is not None else None,
    )
    return validate_moment_spec(spec, n)


def _resolve(value, base_dir):
    """Paths in a run configuration are relative to the configuration file"""
    if isinstance(value, str) and not os.path.isabs(value):
        return os.path.join(base_dir, value)
    return value


@validate_spec(RunConfigSchema)
def _run_config_document(validated_data):
    return validated_data


def load_run_config(path):
    """RunConfig from a configuration file; unset output options stay None"""
    data = _run_config_document(path)
    base_dir = os.path.dirname(os.path.abspath(path))
    return RunConfig(
        graph_path=_resolve(data['graph'], base_dir),
        prior_spec=_resolve(data['prior'], base_dir),
        marginal_spec=_resolve(data['marginals'], base_dir),
        moment_spec=_resolve(data['moments'], base_dir),
        tol=data['tol'],
        max_iter=data['max_iter'],
        output_dir=data['output_dir'],
        output_formats=tuple(data['output_formats']) if data['output_formats'] else None,
    )
