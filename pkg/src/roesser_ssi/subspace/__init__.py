"""Two-stage subspace identification along both grid directions."""
from .pipeline import (DirectionResult, IdentificationResult, ParameterEstimate, identify,
                       recover_parameters, stage2_direction, vertical_sizes)
from .stage1 import ProjectionResult, select_order, stage1_project, stage1_states
from .stage2 import (DynamicsEstimate, InnovationsEstimate, PastEstimate, RQBlocks,
                     assemble_states, from_generators, oblique_gamma, propagation_operator,
                     recover_future_vertical, recover_gamma_vh, recover_innovations_operator,
                     recover_past, regress_dynamics, stage2_rq, to_batches)
