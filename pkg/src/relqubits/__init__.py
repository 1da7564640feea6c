"""relqubits: localised qubits in curved spacetimes.

Transport of fermion spin and photon polarisation along worldlines,
gravitational interference phases, relativistic measurement statistics,
multipartite states and teleportation, and quantum-reference-frame
decoherence channels.
"""

from . import (errors, geometry, trajectories, fermion_transport,
               photon_transport, interferometry, measurement, multiqubit, qrf)

__version__ = "0.1.0"

__all__ = ["errors", "geometry", "trajectories", "fermion_transport",
           "photon_transport", "interferometry", "measurement", "multiqubit",
           "qrf", "__version__"]
