"""
API Routes Module

All routers are mounted under `api_v1_prefix` in main.py.
"""

from stmeta.routes.analysis import analysis_router
from stmeta.routes.simulation import simulation_router

__all__ = [
    "analysis_router",
    "simulation_router",
]
