"""Optimal transport on the round sphere S^n for the cost d^2/2.

Geometry (:mod:`sphereot.sphere`), node sets and fields (:mod:`sphereot.fields`),
entropic / exact solvers and map extraction (:mod:`sphereot.transport`), the
MTW tensor (:mod:`sphereot.mtw`) and the map diagnostics (:mod:`sphereot.analysis`).
"""
from .errors import (AnalysisError, CutLocusError, DegenerateNeighborhood, Infeasible,
                     InvalidDensityBounds, NoConvergence, NodeSetMismatch, NonPositiveDensity,
                     NonPositiveMetric, SizeLimit, SolverError, SphereOTError, UnsupportedScheme,
                     ValidationError)
from .sphere import (Frame, SpherePoint, TangentVector, cost, cost_grad_x, cost_hess_x,
                     exp_map, geodesic_distance, log_map, mixed_det, parallel_transport)
from .fields import (DensityField, MetricField, NodeSet, centered_profile, conformal_metric,
                     generate_nodes, holder_norm, metric_holder_distance, metric_to_density,
                     normalize_density, profile, radius_from_volume, round_metric, uniform_density)
from .transport import (CostMatrix, DiscreteMap, Potentials, SolverConfig, TransportPlan,
                        build_cost, exact_plan, extract_map, identity_map, ma_residual,
                        map_from_potential, sinkhorn, solve)
from .mtw import MTWQuery, MTWReport, a3s_scan, mtw_value
from .analysis import (CutLocusReport, JacobianEstimate, LipschitzReport, MapDistanceReport,
                       awaycut_bound, cutlocus_check, jacobian, lipschitz_norms, map_distance,
                       proof_chain_bound, regularity_monitor)

__version__ = "0.1.0"
