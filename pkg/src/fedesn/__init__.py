"""Wireless VR presence-break simulator with federated reservoir prediction.

Subpackages by concern: ``esn`` (ring reservoirs), ``federated`` (consensus
readout training), ``capacity`` (memory-capacity formulas and their
brute-force check), ``radio`` (link budgets and blockage), ``bip``
(presence-break scoring), ``assoc`` (association planning), ``mobility``
(traces and feature maps), ``scenario`` (end-to-end runs), ``cli``.
"""

from .assoc import (
    AssociationPlan,
    EpsilonGreedyPolicy,
    PredictionSnapshot,
    downlink_feasible,
    oracle_association,
    select_association,
)
from .bip import AwarenessProfile, VideoFrameModel, bip_indicator, bip_score, delivery_vector
from .capacity import (
    CapacityQuery,
    EmpiricalMcConfig,
    mc_closed_form,
    mc_empirical,
    mc_empirical_multi_input,
    mc_empirical_series,
    nrmse,
)
from .esn import EsnModel, ReservoirSpec, build_esn
from .federated import (
    FederatedState,
    LocalDataset,
    TrainResult,
    collect_states,
    dual_update,
    global_update,
    local_update,
    train_federated,
)
from .mobility import LocationCodec, MobilityConfig, Trace, generate_trace
from .radio import Geometry, LinkState, RadioParams
from .scenario import ScenarioConfig, ScenarioError, ScenarioResult, run_scenario, sweep

__version__ = "0.1.0"
