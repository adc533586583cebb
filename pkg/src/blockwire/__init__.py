"""blockwire: typed circuit-block composition.

Parses a symbolic annotation language on schematic net labels, validates
block-to-block connections (voltage rails, protocol buses, required ports),
merges selected blocks into a single netlist, and places/routes a two-layer
board. Exposed as a library, a CLI (``blockwire``), and an HTTP service.
"""

__version__ = "0.1.0"

from .diagnostics import Diagnostic, Kind, Severity

__all__ = ["Diagnostic", "Kind", "Severity", "__version__"]
