"""stackgrad: differentiable Nash equilibria for one-leader multi-follower
Stackelberg games.

The toolkit computes followers' Nash equilibria with a certified relaxation
oracle, differentiates through the concatenated KKT system to obtain
dx*/dpi, and optimizes the leader with a stochastic augmented-Lagrangian
loop. Three example domains (normal-form subsidy games, multi-defender
security games, cyber insurance) ship with analytic derivative oracles and
seeded generators.
"""

from .equilibrium import (EquilibriumPoint, OracleConfig, best_response,
                          nikaido_isoda_residual, recover_duals,
                          relaxation_solve, sample_equilibrium)
from .errors import (BranchJump, ConfigError, DimensionMismatch,
                     DualRecoveryFailure, EmptyEquilibriumSet, InfeasibleSpace,
                     NonConvergence, SingularSystem, StackgradError,
                     UnknownKind)
from .kkt import (EquilibriumJacobian, KktAssembly, assemble_kkt,
                  equilibrium_jacobian, finite_difference_jacobian,
                  solve_equilibrium_jacobian)
from .leader import (LagrangianState, OptimizerConfig, RunTrajectory,
                     augmented_lagrangian_solve, lagrangian_value,
                     sampled_lagrangian_gradient)
from .model import (FollowerSpec, GameInstance, JointStrategy, LeaderProblem,
                    StrategySpace, box_space, feasibility_residual,
                    project_to_space, simplex_space)

__version__ = "0.1.0"
