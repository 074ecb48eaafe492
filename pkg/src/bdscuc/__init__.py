"""Day-ahead unit commitment with an embedded battery-degradation network."""

from .grid import (GridCase, Horizon, Generator, Line, StorageUnit,
                   LoadProfile, RenewableProfile, ValidationReport,
                   load_case, save_case, validate_case, toy_case)
from .degradation import (DegradationNet, Dataset, FeatureVector, TrainConfig,
                          oracle_degradation, generate_dataset, train, forward,
                          save_net, load_net)
from .formulation import (Schedule, VariableIndex, build_tscuc,
                          evaluate_fuel_cost, extract_schedule)
from .embedding import (FeatureExpr, NeuronBounds, ReluEncoding,
                        feature_expressions, propagate_bounds, encode_network,
                        build_lbdscuc, pinned_network_output)
from .verify import (AuditReport, ParityReport, audit_feasibility,
                     recompute_degradation_cost, verify_parity,
                     brute_force_reference)
from .milp import (MilpModel, SolveOptions, SolveResult, solve,
                   solve_lp_relaxation, export_lp, parse_lp)

__version__ = "0.1.0"
