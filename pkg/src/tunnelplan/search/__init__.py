from .hybrid_astar import FORWARD, REVERSE, HybridAStar, SearchConfig, SearchFailure, Waypoint, plan_path
from .reeds_shepp import RSPath, Segment, rs_length, rs_shortest

__all__ = [
    "FORWARD",
    "REVERSE",
    "HybridAStar",
    "RSPath",
    "SearchConfig",
    "SearchFailure",
    "Segment",
    "Waypoint",
    "plan_path",
    "rs_length",
    "rs_shortest",
]
