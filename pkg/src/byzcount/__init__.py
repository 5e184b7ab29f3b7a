"""Simulator for Byzantine-resilient counting on sparse expanders."""
from .engine import ConfigError, RandomTape, RunReport, Simulation, StopCondition, make_protocol, new_simulation
from .graph import (CapacityError, ParameterError, Topology, TopologyFormatError, generate_hnd, load_topology,
                    save_topology, vertex_expansion_exact)

__version__ = "0.1.0"
