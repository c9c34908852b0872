"""
Asymptotics of H(x, y): single-queue Lundberg exponents, the Cramér root, empirical rate fits and the heavy-tail series.
"""


from pqtail.asympt.lundberg import lundberg_1d
from pqtail.asympt.cramer import CramerRoot, solve_cramer
from pqtail.asympt.fit import RateFit, extract_rate, light_tail_prediction, prefactor_warning
from pqtail.asympt.heavy import CENTERINGS, HeavySeries, big_jump_bound, big_jump_sum, heavy_series


__all__ = [
    'CENTERINGS',
    'CramerRoot',
    'HeavySeries',
    'RateFit',
    'big_jump_bound',
    'big_jump_sum',
    'extract_rate',
    'heavy_series',
    'light_tail_prediction',
    'lundberg_1d',
    'prefactor_warning',
    'solve_cramer'
]
