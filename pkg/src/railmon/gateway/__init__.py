"""HTTP gateway service."""

from .app import ROUTE_ROLES, create_app, validate_frame_obj

__all__ = ["ROUTE_ROLES", "create_app", "validate_frame_obj"]
