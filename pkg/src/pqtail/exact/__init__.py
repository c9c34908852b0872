"""
Ground-truth numerics on a truncated grid: the stationary distribution, H(x, y), the balance residual and the
single-queue oracle.
"""


from pqtail.exact.grid import (
    SNAPSHOT_MAGIC,
    TruncatedGrid,
    H_from_grid,
    joint_tail_matrix,
    marginal_tails,
    marginals,
    pgf_eval,
    read_snapshot,
    tail_bounds,
    write_grid_csv,
    write_snapshot
)
from pqtail.exact.kernel import Kernel, Kernel1D
from pqtail.exact.solver import (
    balance_residual,
    default_truncation,
    truncation_bound,
    marginal_stationary_1d,
    stationary,
    transition_apply
)


__all__ = [
    'SNAPSHOT_MAGIC',
    'Kernel',
    'Kernel1D',
    'TruncatedGrid',
    'H_from_grid',
    'balance_residual',
    'default_truncation',
    'truncation_bound',
    'joint_tail_matrix',
    'marginal_stationary_1d',
    'marginal_tails',
    'marginals',
    'pgf_eval',
    'read_snapshot',
    'stationary',
    'tail_bounds',
    'transition_apply',
    'write_grid_csv',
    'write_snapshot'
]
