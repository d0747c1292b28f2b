"""
Schmitt-Trigger metastability API

HTTP front end over the same scenario runner as the command line.
"""

from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from slowapi import _rate_limit_exceeded_handler
from slowapi.errors import RateLimitExceeded

from stmeta.core.config import get_settings, logger
from stmeta.core.errors import StMetaError
from stmeta.middleware import limiter
from stmeta.routes import analysis_router, simulation_router

settings = get_settings()


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info(f"Starting {settings.app_name} {settings.app_version}")
    yield
    logger.info(f"Shutting down {settings.app_name}")


app = FastAPI(
    title=settings.app_name,
    description="Simulation and analysis of Schmitt-Trigger metastability",
    version=settings.app_version,
    lifespan=lifespan,
    docs_url="/docs",
    redoc_url="/redoc",
    openapi_url=f"{settings.api_v1_prefix}/openapi.json",
)

app.state.limiter = limiter
app.add_exception_handler(RateLimitExceeded, _rate_limit_exceeded_handler)


@app.exception_handler(StMetaError)
async def stmeta_error_handler(request: Request, exc: StMetaError) -> JSONResponse:
    """Same JSON body as the CLI prints on stderr, with the error's HTTP status."""
    if exc.status_code >= 500:
        logger.error(f"{request.url.path} failed: {exc.message}")
    else:
        logger.warning(f"{request.url.path} rejected: {exc.message}")
    return JSONResponse(status_code=exc.status_code, content=exc.to_dict())


app.include_router(simulation_router, prefix=settings.api_v1_prefix)
app.include_router(analysis_router, prefix=settings.api_v1_prefix)


@app.get("/", tags=["Root"])
async def root() -> dict:
    """
    API metadata.

    Returns:
        dict: Name, version and endpoint index
    """
    return {
        "message": settings.app_name,
        "version": settings.app_version,
        "endpoints": {
            "docs": "/docs",
            "health": "/health",
            "api": settings.api_v1_prefix,
        },
    }


@app.get("/health", tags=["Health"])
async def health_check() -> dict:
    """Liveness check."""
    return {"status": "healthy", "version": settings.app_version}


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        "stmeta.main:app",
        host="0.0.0.0",
        port=8000,
        reload=settings.debug,
        log_level=settings.log_level.lower(),
    )
