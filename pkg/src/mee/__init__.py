"""Micro-ecology engine.

A deterministic spatial ecology of small recurrent-network organisms.
Units earn energy by compressing the data streams flowing over a toroidal
lattice; selection is nothing but the energy bookkeeping. There is no
fitness function anywhere in this package.
"""

__version__ = "0.1.0"

from .genome import Genome, InterfaceGenes, OperationalGenes, new_uniform_genome, genome_distance
from .physics import PhysicsParams, prediction_error, compression_ratio, energy_update

__all__ = [
    "Genome",
    "InterfaceGenes",
    "OperationalGenes",
    "new_uniform_genome",
    "genome_distance",
    "PhysicsParams",
    "prediction_error",
    "compression_ratio",
    "energy_update",
    "__version__",
]
