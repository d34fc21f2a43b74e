"""Bimanual demonstration analysis and dual-arm behavior-tree planning."""

from .config import DetectorConfig, RunConfig
from .pipeline import analyze, build_plan, dry_run

__all__ = ["DetectorConfig", "RunConfig", "analyze", "build_plan", "dry_run"]
__version__ = "0.1.0"
