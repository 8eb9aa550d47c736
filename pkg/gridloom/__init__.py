"""gridloom: map loop nests onto CGRA and TCPA processor-array models.

Two backends share one reference interpreter:
  - cgra: operation-centric DFG modulo mapping + cycle-accurate simulation
  - tcpa: iteration-centric LSGP tiling, lambda scheduling + simulation
"""

__all__ = ["__version__"]

__version__ = "0.1.0"
