"""HTTP service exposing run, sweep, and validation endpoints."""

from etopt.service.app import app, create_app

__all__ = ["app", "create_app"]
