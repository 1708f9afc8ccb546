"""Model-based duty-cycle control of a genetic toggle switch.

Deterministic and stochastic simulation of single cells and populations,
equilibrium-curve databases of the averaged model, and the PI, PI-PWM and
zero-average-dynamics control laws.
"""
from .config import ExperimentConfig, load_config, load_preset, list_presets
from .controllers import (PIState, PipwmController, PopulationPI, ZadController,
                          pi_population_pwm, pi_population_step, pipwm_init, pipwm_update,
                          zad_duty)
from .equilibria import (CurveDatabase, EquilibriumCurve, all_equilibria, build_curve,
                         build_database, find_equilibrium, nearest_point, project_and_error,
                         stability)
from .experiment import gen_curves, run_experiment, simulate, summarize
from .integrate import CellODE, ConstantInput, PulseSchedule, Trajectory, integrate, period_average
from .model import (AvgModelInputs, ModelParams, ReducedParams, avg_rhs, full_rhs, get_params,
                    qss_rhs, reduce_params, state_scaling, state_unscaling)
from .ssa import build_network, cell_rng, ssa_run

__version__ = "0.1.0"
