"""
Simulation routes.

- POST /simulate: transient run of either model
- POST /phase-map: derivative field grid and rest curves
"""

import logging
from typing import Any, Dict

from fastapi import APIRouter, Depends, Request, status

from stmeta.core.config import get_settings
from stmeta.core.run_config import RunConfig
from stmeta.middleware.rate_limiting import limiter
from stmeta.routes.dependencies import get_scenario_service
from stmeta.services.scenarios import ScenarioService

logger = logging.getLogger(__name__)

simulation_router = APIRouter(tags=["Simulation"])


def result_payload(result) -> Dict[str, Any]:
    """Scenario result without the plot descriptions."""
    return result.model_dump(mode="json", exclude={"plots"})


@simulation_router.post(
    "/simulate",
    response_model=Dict[str, Any],
    summary="Integrate one stimulus",
    status_code=status.HTTP_200_OK,
)
@limiter.limit(get_settings().rate_limit_compute)
def simulate(
    request: Request,
    config: RunConfig,
    service: ScenarioService = Depends(get_scenario_service),
) -> Dict[str, Any]:
    """
    Run the `simulate` scenario.

    Returns:
        Summary, the trajectory table and the events document

    Raises:
        StMetaError: Mapped to its HTTP status by the application handler
    """
    return result_payload(service.run("simulate", config))


@simulation_router.post(
    "/phase-map",
    response_model=Dict[str, Any],
    summary="Derivative field over a grid",
    status_code=status.HTTP_200_OK,
)
@limiter.limit(get_settings().rate_limit_compute)
def phase_map(
    request: Request,
    config: RunConfig,
    service: ScenarioService = Depends(get_scenario_service),
) -> Dict[str, Any]:
    """Run the `phase-map` scenario."""
    return result_payload(service.run("phase-map", config))
