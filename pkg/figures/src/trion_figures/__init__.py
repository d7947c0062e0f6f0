"""Panel renderer for trion-dynamics run directories.

Consumes only the documented run-directory files (values.csv,
manifest.json, fits.json) and produces deterministic PNG panels for the
Rabi, Ramsey, coherence-decay, control-map, and Zeeman datasets.
"""

from .panels import PanelError, PanelSpec, render

__version__ = "0.1.0"

__all__ = ["PanelError", "PanelSpec", "render"]
