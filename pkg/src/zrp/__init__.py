"""Simulation lab for zero-range processes with long-range jumps.

Exact event-driven dynamics on the torus, equilibrium product measures,
additive-functional recording, and the spectral/limit-theory toolkit used
to check scaling predictions against simulation.
"""

__version__ = "0.1.0"

from . import model, equilibrium, observables  # noqa: F401
