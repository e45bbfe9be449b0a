"""Non-backtracking spectra of finite graphs and of their universal covers."""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .graph import (Graph, LocalOperator, OperatorFamily, TreeBall, follow, format_graph,
                    make_family, evaluate, parse_graph, read_graph, tree_ball)
from .finite_spectrum import (NBSpectrumFinite, build_B, build_companion, growth_rate,
                              nb_spectrum_finite, verify_bass)
from .ratios import (RatioAssignment, RMatrix, ValidityReport, alpha, boundary_witness,
                     build_R, build_fu, level_sums, path_ratio, residual_a, validate,
                     verify_fu)
from .solver import (Budget, Decision, MembershipVerdict, continuation_solve,
                     fixed_point_solve, membership, newton_multistart)
from .scanner import SpectrumRaster, emit_raster, prefilter, scan
from .lifts import random_lift, region_distance_stats, split_old_new
