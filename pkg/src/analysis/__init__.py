"""Artifact writers and charts."""

from .reporting import render_report, write_json, write_table

__all__ = ["render_report", "write_json", "write_table"]
