"""Services: model operations, integration, analysis, control and scenario orchestration."""

from stmeta.services.integrator import Integrator, integrate
from stmeta.services.scenarios import SUBCOMMANDS, ScenarioService

__all__ = [
    # Integration
    "Integrator",
    "integrate",
    # Orchestration
    "ScenarioService",
    "SUBCOMMANDS",
]
