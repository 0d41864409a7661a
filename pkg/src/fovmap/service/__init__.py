"""HTTP service wrapping the mapping pipeline."""

from fovmap.service.app import create_app

__all__ = ["create_app"]
