"""Online execution: scenarios, the strategy executor and the planning/tracking scheduler."""
from .executor import ExecutionTrace, execute, local_waypoint
from .render import render_frame, render_trace
from .scenario import TerrainScenario, from_layout, generate_scenario, perturb_polygons
from .schedule import Slot, schedule, total_idle

__all__ = ["ExecutionTrace", "execute", "local_waypoint", "render_frame", "render_trace", "TerrainScenario",
           "from_layout", "generate_scenario", "perturb_polygons", "Slot", "schedule", "total_idle"]
