"""Analysis routes: delay sweeps, forced outputs, pinning and the resolution fit."""

import logging
from typing import Any, Dict

from fastapi import APIRouter, Depends, Request, status

from stmeta.core.config import get_settings
from stmeta.core.run_config import RunConfig
from stmeta.middleware.rate_limiting import limiter
from stmeta.routes.dependencies import get_scenario_service
from stmeta.routes.simulation import result_payload
from stmeta.services.scenarios import ScenarioService

logger = logging.getLogger(__name__)

analysis_router = APIRouter(tags=["Analysis"])


@analysis_router.post("/delay-sweep", response_model=Dict[str, Any], status_code=status.HTTP_200_OK)
@limiter.limit(get_settings().rate_limit_compute)
def delay_sweep(
    request: Request,
    config: RunConfig,
    service: ScenarioService = Depends(get_scenario_service),
) -> Dict[str, Any]:
    """Measured and predicted delays over a list of overdrives."""
    return result_payload(service.run("delay-sweep", config))


@analysis_router.post("/control", response_model=Dict[str, Any], status_code=status.HTTP_200_OK)
@limiter.limit(get_settings().rate_limit_compute)
def control(
    request: Request,
    config: RunConfig,
    service: ScenarioService = Depends(get_scenario_service),
) -> Dict[str, Any]:
    """
    Synthesize the input for a desired output and check it in closed loop.

    An unrealizable plan answers 409 with the violating intervals in `details`.
    """
    return result_payload(service.run("control", config))


@analysis_router.post("/pin", response_model=Dict[str, Any], status_code=status.HTTP_200_OK)
@limiter.limit(get_settings().rate_limit_compute)
def pin(
    request: Request,
    config: RunConfig,
    service: ScenarioService = Depends(get_scenario_service),
) -> Dict[str, Any]:
    """Pin the output on γ2 and release it in both directions."""
    return result_payload(service.run("pin", config))


@analysis_router.post("/fit-tau", response_model=Dict[str, Any], status_code=status.HTTP_200_OK)
@limiter.limit(get_settings().rate_limit_compute)
def fit_tau(
    request: Request,
    config: RunConfig,
    service: ScenarioService = Depends(get_scenario_service),
) -> Dict[str, Any]:
    """Resolution time constant from pinned releases."""
    return result_payload(service.run("fit-tau", config))
