"""Data-driven h2-optimal model order reduction for discrete-time LTI systems.

Given one-step state/input snapshots of an unknown stable system, the
package reconstructs the dual (adjoint) data, evaluates the exact h2
objective gradients without the system matrices, and descends them with a
stability-safeguarded Armijo line search.  DMDc, Loewner, and Hankel-based
initializers plus a model-based oracle round out the pipeline.
"""

from .dataio import (AssumptionReport, DataEnsemble, NoiseSpec, Trajectory,
                     TrajectorySet, check_assumptions, first_transitions,
                     generate_ensemble, generate_trajectories, load_ensemble,
                     numerical_rank, save_ensemble)
from .ddgrad import (DualData, GramianSet, data_gradients,
                     data_gradients_B_known, data_gradients_from_ensemble,
                     objective_f, pencil_conditions, reconstruct_dual,
                     reconstruct_dual_known_input, rom_gramians, solve_R,
                     solve_S, solve_SB)
from .errors import (AssumptionViolated, FormatError, GenerationFailed,
                     InsufficientData, NoUniqueSolution, NotStable,
                     RankDeficientData, ReductionError, SingularAhat,
                     SingularE, SingularShift, SingularSystem,
                     StabilizationFailed)
from .initmor import (FreqSample, ImpulseData, impulse_from_system,
                      init_data_bt, init_dmdc, init_loewner,
                      load_frequency_samples, load_impulse_data, make_stable,
                      sample_frequency_data, save_frequency_samples,
                      save_impulse_data)
from .matequ import (PencilReport, pencil_diagnostics, pseudoinverse,
                     solve_discrete_sylvester, solve_stein, spectral_radius)
from .optim import (IterRecord, OptimParams, OptimResult, StopReason, run,
                    stack_direction)
from .sysmodel import (ErrorGramians, GradientTriple, H2ErrorEvaluator,
                       LtiSystem, Rom, SyntheticSpec, error_gramians,
                       generate_synthetic, h2_error, h2_norm,
                       markov_parameters, model_based_gradients, simulate,
                       transfer_eval)

__version__ = "0.1.0"
