"""Middleware components."""

from stmeta.middleware.rate_limiting import get_client_identifier, limiter

__all__ = [
    "get_client_identifier",
    "limiter",
]
