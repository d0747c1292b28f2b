"""Rate limiting for the compute endpoints."""

from fastapi import Request
from slowapi import Limiter
from slowapi.util import get_remote_address

from stmeta.core.config import get_settings


def get_client_identifier(request: Request) -> str:
    """
    Key requests by the `X-Client-Id` header, falling back to the remote address.

    Args:
        request: Incoming request

    Returns:
        str: Rate limit bucket key
    """
    client_id = request.headers.get("x-client-id")
    if client_id:
        return f"client:{client_id.strip()}"
    return f"ip:{get_remote_address(request)}"


limiter = Limiter(
    key_func=get_client_identifier,
    default_limits=[get_settings().rate_limit_default],
    enabled=get_settings().rate_limit_enabled,
)

