"""Network simulator: topologies, links, adversary and the event engine."""

from .adversary import AdversaryScript, Effect, Frame, Rule, apply_adversary
from .engine import InstanceOutcome, RunResult, Simulation, run
from .link import LinkModel
from .scenario import ClockSpec, Scenario, Timing, TopologySpec, load_scenario, scenario_from_dict
from .topology import Topology, build_topology
from .trace import EventTrace, TraceRecord

__all__ = [
    "AdversaryScript", "ClockSpec", "Effect", "EventTrace", "Frame", "InstanceOutcome",
    "LinkModel", "Rule", "RunResult", "Scenario", "Simulation", "Timing", "Topology",
    "TopologySpec", "TraceRecord", "apply_adversary", "build_topology", "load_scenario",
    "run", "scenario_from_dict",
]
