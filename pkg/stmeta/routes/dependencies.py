"""Shared route dependencies."""

from functools import lru_cache

from stmeta.services.scenarios import ScenarioService


@lru_cache()
def get_scenario_service() -> ScenarioService:
    """Process-wide scenario runner."""
    return ScenarioService()
