"""Stretched internal DLA on the half-plane lattice and its
first-passage-percolation twin.

The package simulates two pictures of the same random forest on the
rotated upper-half-plane lattice and verifies that they agree:

* ``fpp``: independent exponential edge weights whose rate halves per
  level; geodesics to the boundary form a spanning forest.
* ``sidla``: boundary sites emit coin-walking particles that grow one
  tree each; the tree laws coincide with the geodesic forest.
* ``coupling``: the explicit ring construction that turns one picture
  into the other, replayable and checkable bit for bit.
* ``analysis`` / ``render`` / ``cli``: exact identities, statistics,
  drawings, and the command-line front end.
"""

from .errors import ConfigError, CouplingFault, VerificationFailure
from .lattice import Dir, Edge, Vertex, Window, head, in_cone, shift
from .fpp import (
    GeodesicForest,
    WeightField,
    WeightProfile,
    build_forest,
    load_snapshot,
    snapshot_text,
    tree_of,
)
from .sidla import SidlaState, SimulationLimitError, run_until_covered
from .coupling import AuxClockField, CoupledRing, RingKind, verify_coupling

__version__ = "0.1.0"

__all__ = [
    "AuxClockField",
    "ConfigError",
    "CoupledRing",
    "CouplingFault",
    "Dir",
    "Edge",
    "GeodesicForest",
    "RingKind",
    "SidlaState",
    "SimulationLimitError",
    "VerificationFailure",
    "Vertex",
    "WeightField",
    "WeightProfile",
    "Window",
    "build_forest",
    "head",
    "in_cone",
    "load_snapshot",
    "run_until_covered",
    "shift",
    "snapshot_text",
    "tree_of",
    "verify_coupling",
    "__version__",
]
