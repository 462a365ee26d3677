"""Shared control of a planar thruster lander with learned Koopman dynamics.

The toolkit simulates the lander, learns the joint pilot-craft dynamics by
EDMD over a fixed observable dictionary, plans assistance with LQR or a
sequential-action controller, arbitrates human and autonomy commands through
a Maxwell's Demon filter, and orchestrates multi-condition studies with
scripted pilots or a live cockpit.
"""

from .allocation import AllocationRecord, agreement_stats, mda_filter
from .koopman import (BasisSpec, KoopmanLearner, KoopmanModel, SnapshotPair,
                      basis_jacobians, eval_basis, fit, linearize, load_model,
                      predict, save_model)
from .lander import (ControlInput, LanderState, SimConfig, TrialStatus,
                     classify, reset, step)
from .metrics import OccupancyGrid, SpatialDistribution, ergodicity, heatmap, summarize
from .pilots import ExpertPilot, NovicePilot, PilotConfig, make_pilot
from .policy import (Controller, CostWeights, MpcParams, autonomy_command,
                     lqr_gain, running_cost, sac_action, terminal_cost)
from .trials import TrialRecord, read_records, write_records

__version__ = "0.1.0"
