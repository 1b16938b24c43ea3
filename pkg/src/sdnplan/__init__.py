"""Joint switch upgrade and controller placement planning for hybrid SDN WANs."""

from .errors import PlannerError
from .instance import Plan, PlanMetrics, ProblemInstance, build_instance, check_feasibility, compute_lambda, evaluate
from .topology import Topology, distance_matrix, estimate_flows, load_topology, parse_topology

__version__ = "0.1.0"
