"""
Pytest configuration and shared fixtures.

Provides reference model parameter sets, settings, run-configuration files
and the HTTP test client.
"""

from pathlib import Path
from typing import Any, Callable, Dict

import pytest
import yaml
from fastapi.testclient import TestClient

from stmeta.core.config import Settings
from stmeta.models.analysis import DelaySpec
from stmeta.models.cmos import CmosStModel
from stmeta.models.st_model import StModel


# =============================================================================
# Test Settings
# =============================================================================

@pytest.fixture(scope="session")
def test_settings() -> Settings:
    """
    Provide test settings configuration.

    Returns:
        Settings object with serial execution and rate limiting disabled
    """
    return Settings(
        app_name="Schmitt-Trigger Metastability Toolkit Test",
        app_version="1.0.0-test",
        debug=True,
        log_level="DEBUG",
        default_tol=1e-9,
        output_points=1000,
        workers=1,
        rate_limit_enabled=False,
        api_v1_prefix="/api/v1",
    )


@pytest.fixture(scope="function")
def settings(test_settings: Settings) -> Settings:
    """Get application settings for tests."""
    return test_settings


# =============================================================================
# Model Fixtures
# =============================================================================

@pytest.fixture
def fast_model() -> StModel:
    """High-gain model: A=1000, k=0.5, M=1 V, τ0=1 ns (τ2 ≈ 2 ps)."""
    return StModel(gain_a=1000.0, feedback_k=0.5, saturation_m=1.0, ref_v=0.0, tau0=1e-9)


@pytest.fixture
def slow_model() -> StModel:
    """Low-gain model: A=3, k=0.5, M=1 V, τ0=1 ns (κ = 1/6, τ2 = 2 ns)."""
    return StModel(gain_a=3.0, feedback_k=0.5, saturation_m=1.0, ref_v=0.0, tau0=1e-9)


@pytest.fixture
def shifted_model() -> StModel:
    """Model with a non-zero reference voltage."""
    return StModel(gain_a=50.0, feedback_k=0.4, saturation_m=1.2, ref_v=0.3, tau0=2e-9)


@pytest.fixture
def delay_spec() -> DelaySpec:
    """Downstream threshold at mid swing."""
    return DelaySpec(sigma=0.5)


@pytest.fixture
def cmos_model() -> CmosStModel:
    """Default square-law circuit (N/P betas 2:1)."""
    return CmosStModel()


@pytest.fixture
def symmetric_cmos() -> CmosStModel:
    """Mirror-symmetric circuit: equilibrium at (VDD/2, VDD/2)."""
    return CmosStModel.symmetric()


# =============================================================================
# Run Configuration Fixtures
# =============================================================================

@pytest.fixture
def opamp_section() -> Dict[str, Any]:
    """Model section for the high-gain reference model."""
    return {
        "kind": "opamp",
        "gain_a": 1000.0,
        "feedback_k": 0.5,
        "saturation_m": 1.0,
        "ref_v": 0.0,
        "tau0": 1e-9,
    }


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[Dict[str, Any]], Path]:
    """
    Factory writing a run configuration as YAML.

    Returns:
        Callable taking the config mapping and returning the file path
    """

    def _write(data: Dict[str, Any], name: str = "run.yaml") -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def simulate_config(opamp_section: Dict[str, Any], tmp_path: Path) -> Dict[str, Any]:
    """Constant sub-threshold input with the output at rest on γ1."""
    return {
        "model": opamp_section,
        "scenario": {"input": {"kind": "constant", "level": 0.2}},
        "run": {"span": [0.0, 5e-9], "output_points": 101},
        "output": {"dir": str(tmp_path / "out"), "formats": ["csv", "json"]},
    }


# =============================================================================
# HTTP Client
# =============================================================================

@pytest.fixture
def client() -> TestClient:
    """FastAPI test client."""
    from stmeta.main import app

    with TestClient(app) as test_client:
        yield test_client
