"""
Schmitt-Trigger metastability toolkit.

Simulation and analysis of the clipped-linear Schmitt-Trigger model, an inverse
input controller, and a square-law CMOS companion model.
"""

__version__ = "1.0.0"
