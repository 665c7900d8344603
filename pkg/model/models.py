"""
Domain types for the network bridge solvers.

All node indices held by these types are 0-based. Conversion from and to the
1-based labels used in JSON/CSV/DOT happens in routes/loaders.py and
utils/exporters.py only.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def _frozen(array, dtype=float):
    """Copy into a read-only ndarray so shared values cannot be mutated"""
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Graph:
    """Directed graph with per-edge lengths"""
    n: int
    edges: tuple                 # ((i, j, length), ...) sorted, 0-based
    A: np.ndarray                # n x n 0/1 adjacency
    L: np.ndarray                # n x n lengths, +inf where no edge

    def __post_init__(self):
        object.__setattr__(self, 'A', _frozen(self.A, dtype=np.int64))
        object.__setattr__(self, 'L', _frozen(self.L))

    def successors(self, i):
        return np.flatnonzero(self.A[i])

    def has_edge(self, i, j):
        return bool(self.A[i, j])


@dataclass(frozen=True)
class MarkovPrior:
    """Path-measure prior: initial law plus one transition matrix per step"""
    n: int
    N: int
    p0: np.ndarray
    steps: np.ndarray            # shape (N, n, n), row-stochastic
    kind: str = 'custom'
    label: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'p0', _frozen(self.p0))
        object.__setattr__(self, 'steps', _frozen(self.steps))


@dataclass(frozen=True)
class PartialMarginal:
    """Known portion of an endpoint marginal: a node subset and its masses"""
    n: int
    subset: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'subset', tuple(int(x) for x in self.subset))
        object.__setattr__(self, 'values', _frozen(self.values))

    @property
    def mass(self):
        return float(np.sum(self.values))

    @property
    def is_full(self):
        return len(self.subset) == self.n

    @property
    def mask(self):
        out = np.zeros(self.n, dtype=bool)
        out[list(self.subset)] = True
        return out

    def dense(self):
        """n-vector holding the known values and zeros elsewhere"""
        out = np.zeros(self.n)
        out[list(self.subset)] = self.values
        return out


@dataclass
class BridgeSolution:
    """Schrödinger potentials, optimal endpoint joint and diagnostics"""
    phi0: np.ndarray
    phiN: np.ndarray
    phihat0: np.ndarray
    phihatN: np.ndarray
    q0N: np.ndarray
    q0_star: np.ndarray
    qN_star: np.ndarray
    iterations: int
    final_gap: float
    kl_value: float
    method: str = 'imsbp'
    converged: bool = True
    gap_history: list = field(default_factory=list)
    contraction_bound: Optional[float] = None


@dataclass
class FlowEvolution:
    """Per-time marginals, per-step optimal transitions and edge mass flows"""
    marginals: np.ndarray        # (N+1, n)
    transitions: np.ndarray      # (N, n, n)
    edge_flows: np.ndarray       # (N, n, n)
    potentials: np.ndarray       # (N+1, n), phi(t, .)

    @property
    def horizon(self):
        return self.transitions.shape[0]


@dataclass(frozen=True)
class MomentSpec:
    """Moment targets for the endpoint marginals"""
    order: int = 1
    m0_1: Optional[float] = None
    mN_1: Optional[float] = None
    m0_2: Optional[float] = None
    mN_2: Optional[float] = None
    node_values: Optional[tuple] = None

    @property
    def constrains_initial(self):
        return self.m0_1 is not None

    @property
    def constrains_final(self):
        return self.mN_1 is not None

    @property
    def sides(self):
        if self.constrains_initial and self.constrains_final:
            return 'both'
        if self.constrains_initial:
            return 'initial'
        if self.constrains_final:
            return 'final'
        return 'none'

    def values(self, n):
        """Numeric value attached to each state; labels 1..n by default"""
        if self.node_values is None:
            return np.arange(1, n + 1, dtype=float)
        return np.asarray(self.node_values, dtype=float)


@dataclass
class DualState:
    """Multipliers of the moment-constrained problem and ascent diagnostics"""
    lam: float = 0.0
    mu: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    theta: float = -1.0
    objective: float = float('nan')
    grad_norm: float = float('inf')
    iterations: int = 0
    converged: bool = False
    capped: bool = False

    def multipliers(self):
        return np.array([self.lam, self.mu, self.alpha, self.beta])


@dataclass
class RunConfig:
    """One batch run of the command-line tool"""
    graph_path: str              # file path or inline document
    prior_spec: dict             # likewise for the spec fields
    marginal_spec: Optional[dict] = None
    moment_spec: Optional[dict] = None
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    output_dir: Optional[str] = None
    output_formats: Optional[tuple] = None
