"""Semantic feature division multiple access (SFDMA) toolkit.

Binarized multi-user semantic codecs trained with a robust information
bottleneck objective, broadcast-channel simulation, ABG performance curves
and minimum-power allocation.
"""

from .abg import AbgParams, abg_eval, abg_fit, required_sinr
from .channel import ChannelRealization, broadcast, equalize, sample_rayleigh, sinr
from .data import Dataset, load_idx, make_synthetic
from .power import PowerProblem, PowerSolution, build_problem, direct_solve, simplex_solve
from .rib import UserModel, rib_loss
from .trainer import TrainConfig, train

__version__ = "0.1.0"
