"""Fixture MCP servers (templates) and the in-process tracing shim."""

__version__ = "0.1.0"
