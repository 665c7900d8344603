"""
Directed-graph utilities used by the priors:
  - construction from a 1-based edge list
  - strong connectivity (networkx)
  - walk counting and enumeration
  - Perron eigendata by power iteration on A + I
"""
import logging

import networkx as nx
import numpy as np

from .errors import ConvergenceError, InstanceTooLargeError, InvalidInputError
from .models import Graph

logger = logging.getLogger(__name__)

DEFAULT_EDGE_LENGTH = 1.0
MAX_ENUMERATED_PATHS = 10 ** 6
PERRON_TOL = 1e-12
PERRON_MAX_ITER = 100_000


def build_graph(n, edges):
    """
    Build a Graph from 1-based (from, to[, length]) triples.

    Args:
        n: node count, at least 2
        edges: iterable of (from, to) or (from, to, length); length defaults to 1

    Returns:
        Graph with 0-based edges sorted by (from, to)
    """
    n = int(n)
    if n < 2:
        raise InvalidInputError(f"a graph needs at least 2 nodes, got n={n}")

    A = np.zeros((n, n), dtype=np.int64)
    L = np.full((n, n), np.inf)
    triples = []
    for edge in edges:
        if len(edge) == 2:
            src, dst = edge
            length = DEFAULT_EDGE_LENGTH
        else:
            src, dst, length = edge
            length = DEFAULT_EDGE_LENGTH if length is None else float(length)
        src, dst = int(src), int(dst)
        if not (1 <= src <= n and 1 <= dst <= n):
            raise InvalidInputError(f"edge {src}->{dst} has a node outside 1..{n}")
        if not np.isfinite(length) or length <= 0:
            raise InvalidInputError(f"edge {src}->{dst} has non-positive length {length}")
        i, j = src - 1, dst - 1
        if A[i, j]:
            raise InvalidInputError(f"duplicate edge {src}->{dst}")
        A[i, j] = 1
        L[i, j] = length
        triples.append((i, j, length))

    return Graph(n=n, edges=tuple(sorted(triples)), A=A, L=L)


def to_networkx(g):
    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(g.n))
    digraph.add_weighted_edges_from(g.edges, weight='length')
    return digraph


def is_strongly_connected(g):
    """True iff every node reaches every node along directed edges"""
    return nx.is_strongly_connected(to_networkx(g))


def count_paths(g, t):
    """Entry (i, j) is the number of directed walks of length t from i to j"""
    if t < 0:
        raise InvalidInputError(f"walk length must be nonnegative, got {t}")
    return np.linalg.matrix_power(g.A, int(t))


def enumerate_paths(g, i, j, t, limit=MAX_ENUMERATED_PATHS):
    """
    All walks of length t from i to j, in lexicographic order.
    Walks are tuples of 0-based node indices of length t + 1.
    """
    if t < 1:
        raise InvalidInputError(f"walk length must be at least 1, got {t}")
    total = int(count_paths(g, t)[i, j])
    if total > limit:
        raise InstanceTooLargeError(f"{total} walks from {i} to {j} exceed the cap of {limit}")

    # reach[k][x] > 0 iff x reaches j in exactly k steps
    reach = [count_paths(g, k)[:, j] for k in range(t + 1)]
    paths = []

    def extend(prefix, remaining):
        if remaining == 0:
            paths.append(tuple(prefix))
            return
        for nxt in g.successors(prefix[-1]):
            if reach[remaining - 1][nxt] > 0:
                prefix.append(int(nxt))
                extend(prefix, remaining - 1)
                prefix.pop()

    if reach[t][i] > 0:
        extend([int(i)], t)
    return paths


def perron(g, tol=PERRON_TOL, max_iter=PERRON_MAX_ITER):
    """
    Perron eigendata of the adjacency matrix.

    Power iteration runs on A + I, which has the same eigenvectors and a
    strictly dominant eigenvalue lambda_A + 1 even when the graph is periodic.

    Returns:
        (lambda_A, u, v): spectral radius, left and right eigenvectors with
        strictly positive entries, ||v||_2 = 1 and sum(u * v) = 1
    """
    if not is_strongly_connected(g):
        raise InvalidInputError("Perron eigendata requires a strongly connected graph")

    B = g.A.astype(float) + np.eye(g.n)
    v = np.full(g.n, 1.0 / g.n)
    u = np.full(g.n, 1.0 / g.n)

    for iteration in range(1, max_iter + 1):
        v_next = B @ v
        u_next = u @ B
        v = v_next / np.linalg.norm(v_next)
        u = u_next / (u_next @ v)

        # residuals of the vectors as returned
        lam = float((g.A @ v) @ v)
        residual_v = np.abs(g.A @ v - lam * v).max()
        residual_u = np.abs(u @ g.A - lam * u).max()
        if residual_v < tol and residual_u < tol:
            break
    else:
        raise ConvergenceError(
            f"power iteration did not reach tol={tol} in {max_iter} iterations",
            iterations=max_iter,
            final_gap=float(max(residual_v, residual_u)),
        )

    logger.debug("perron: lambda_A=%.15g after %d iterations", lam, iteration)
    return lam, u, v


def topological_entropy(g):
    """H_G = log of the spectral radius of A"""
    lam, _, _ = perron(g)
    return float(np.log(lam))
