"""
Unit tests for middleware components.

Tests the rate limiting key function and limiter wiring.
"""

from unittest.mock import MagicMock

import pytest
from fastapi import Request

from stmeta.middleware.rate_limiting import get_client_identifier, limiter


@pytest.mark.unit
class TestRateLimiting:
    """Test rate limiting middleware."""

    def test_get_client_identifier_with_header(self):
        """Test keying by the X-Client-Id header."""
        request = MagicMock(spec=Request)
        request.headers = {"x-client-id": " lab-bench-3 "}
        request.client = MagicMock()
        request.client.host = "192.168.1.1"

        result = get_client_identifier(request)

        assert result == "client:lab-bench-3"

    def test_get_client_identifier_without_header(self):
        """Test falling back to the remote address."""
        request = MagicMock(spec=Request)
        request.headers = {}
        request.client = MagicMock()
        request.client.host = "192.168.1.100"

        result = get_client_identifier(request)

        assert result == "ip:192.168.1.100"

    def test_limiter_initialized(self):
        """Test that limiter is properly initialized."""
        assert limiter is not None
        assert limiter._key_func == get_client_identifier
        assert limiter._default_limits is not None
