"""
Artifact writers for solved bridges
  - marginals.csv: (N+1) x n mass evolution, one row per time, node labels as header
  - flows_t{t}.dot: one digraph per interval, edges labelled with the mass moved
  - solution.json: potentials, joint law, completions and diagnostics
All node labels are 1-based.
"""
import json
import logging
import os

import numpy as np
import pandas as pd

from middleware.validators import DualSchema, SolutionSchema

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = '%.10g'
# flows below this are numerical dust and are left out of the drawings
DOT_MIN_FLOW = 1e-12


def marginals_frame(flow):
    """DataFrame view of the mass evolution: rows are times, columns node labels"""
    n = flow.marginals.shape[1]
    return pd.DataFrame(flow.marginals, columns=[str(i + 1) for i in range(n)])


def write_marginals_csv(flow, path, float_format=CSV_FLOAT_FORMAT):
    marginals_frame(flow).to_csv(path, index=False, float_format=float_format, lineterminator='\n')
    return path


def flow_dot(flow, t):
    """DOT text for interval (t, t+1)"""
    marginals = flow.marginals[t]
    moved = flow.edge_flows[t]
    lines = [f'digraph flow_t{t} {{', '    rankdir=LR;']
    for i, mass in enumerate(marginals):
        lines.append(f'    {i + 1} [label="{i + 1}\\n{mass:.3f}", mass={mass:.10g}];')
    for i, j in zip(*np.nonzero(moved > DOT_MIN_FLOW)):
        lines.append(f'    {i + 1} -> {j + 1} [label="{moved[i, j]:.3f}", flow={moved[i, j]:.10g}];')
    lines.append('}')
    return '\n'.join(lines) + '\n'


def write_flow_dot(flow, t, path):
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write(flow_dot(flow, t))
    return path


def solution_document(sol, dual=None):
    """JSON-ready dict of a BridgeSolution (plus moment multipliers when present)"""
    n = sol.q0N.shape[0]
    document = {
        'nodes': list(range(1, n + 1)),
        'method': sol.method,
        'phi0': sol.phi0.tolist(),
        'phiN': sol.phiN.tolist(),
        'phihat0': sol.phihat0.tolist(),
        'phihatN': sol.phihatN.tolist(),
        'q0N': sol.q0N.tolist(),
        'q0_star': sol.q0_star.tolist(),
        'qN_star': sol.qN_star.tolist(),
        'iterations': sol.iterations,
        'final_gap': sol.final_gap,
        'kl_value': sol.kl_value,
        'converged': sol.converged,
        'contraction_bound': sol.contraction_bound,
        'gap_history': list(sol.gap_history),
        'dual': DualSchema().dump(dual) if dual is not None else None,
    }
    return SolutionSchema().dump(document)


def write_solution_json(sol, path, dual=None):
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(solution_document(sol, dual), fh, indent=2)
        fh.write('\n')
    return path


def export_all(sol, flow, out_dir, formats=('csv', 'json', 'dot'), dual=None,
               float_format=CSV_FLOAT_FORMAT):
    """Write every requested artifact into out_dir and return the paths written"""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if 'csv' in formats:
        written.append(write_marginals_csv(flow, os.path.join(out_dir, 'marginals.csv'), float_format))
    if 'dot' in formats:
        for t in range(flow.horizon):
            written.append(write_flow_dot(flow, t, os.path.join(out_dir, f'flows_t{t}.dot')))
    if 'json' in formats:
        written.append(write_solution_json(sol, os.path.join(out_dir, 'solution.json'), dual))
    logger.info("wrote %d artifacts to %s", len(written), out_dir)
    return written
