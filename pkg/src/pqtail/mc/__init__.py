"""
Seeded Monte Carlo estimators of H(x, y).
"""


from pqtail.mc.estimate import AGREEMENT_SIGMAS, ESTIMATE_CSV_HEADER, Estimate
from pqtail.mc.queue import simulate_queue_tail
from pqtail.mc.passage import (
    DEFAULT_HORIZON_CAP,
    DEFAULT_STEP_CAP,
    first_passage_prob,
    first_passage_tilted,
    heavy_first_passage,
    tilted_model
)


__all__ = [
    'AGREEMENT_SIGMAS',
    'DEFAULT_HORIZON_CAP',
    'DEFAULT_STEP_CAP',
    'ESTIMATE_CSV_HEADER',
    'Estimate',
    'first_passage_prob',
    'first_passage_tilted',
    'heavy_first_passage',
    'simulate_queue_tail',
    'tilted_model'
]
