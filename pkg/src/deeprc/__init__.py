"""Data-driven repetitive control of periodic plants.

Periodic linear dynamics are recast as a per-period time-invariant model,
periodic disturbances become constant in that domain, and a chained one-step
data-driven predictor feeds a constrained receding-horizon controller that
attenuates them.  Rank and representability properties of the underlying
data matrices can be verified numerically, and a simulation harness compares
the per-period controller against a raw-domain baseline and no control.
"""

from .plant import LptvPlant, TrajectoryLog
from .lifting import (AugmentedLiftedSystem, LiftedSystem, augment,
                      lift_signal, lift_system, unlift_signal)
from .hankel import (BlockHankel, PersistencyReport, block_hankel,
                     is_persistently_exciting, numerical_rank, DEFAULT_RANK_TOL)
from .lemma import (ControllabilityReport, LtiDisturbedSystem, PersistencyError,
                    StateInputRankCheck, augmented_from_lifted,
                    check_state_input_rank, controllability_rank,
                    represent_trajectory, verify_state_representation)
from .predictor import (DataBuffer, PredictorModel, RankDeficientDataError,
                        build_instrument, fit_predictor)
from .qp import QpIterationLimit, QpResult, solve_qp
from .controller import (CLDeePCController, ControlDecision, DeePRCController,
                         OcpConfig, iteration_cost, solve_ocp, solve_ocp_affine)
from .experiment import (ArmResult, ControllerSettings, ExperimentConfig,
                         RunReport, case_study_config_path, emit_plots,
                         export_csv, load_trajectory_csv, run_experiment)

__all__ = [
    "LptvPlant", "TrajectoryLog",
    "LiftedSystem", "AugmentedLiftedSystem", "augment",
    "lift_signal", "lift_system", "unlift_signal",
    "BlockHankel", "PersistencyReport", "block_hankel",
    "is_persistently_exciting", "numerical_rank", "DEFAULT_RANK_TOL",
    "ControllabilityReport", "LtiDisturbedSystem", "PersistencyError",
    "StateInputRankCheck", "augmented_from_lifted", "check_state_input_rank",
    "controllability_rank", "represent_trajectory", "verify_state_representation",
    "DataBuffer", "PredictorModel", "RankDeficientDataError",
    "build_instrument", "fit_predictor",
    "QpIterationLimit", "QpResult", "solve_qp",
    "CLDeePCController", "ControlDecision", "DeePRCController",
    "OcpConfig", "iteration_cost", "solve_ocp", "solve_ocp_affine",
    "ArmResult", "ControllerSettings", "ExperimentConfig", "RunReport",
    "case_study_config_path", "emit_plots", "export_csv",
    "load_trajectory_csv", "run_experiment",
]

__version__ = "0.1.0"
