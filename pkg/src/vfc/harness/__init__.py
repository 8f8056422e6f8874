"""Batch execution, manifests, reporting, and the command-line interface."""

from vfc.harness.config import RunConfig
from vfc.harness.manifest import Manifest, ManifestEntry, load_manifest
from vfc.harness.runner import BatchResult, run_batch
from vfc.harness.report import write_report

__all__ = [
    "BatchResult",
    "Manifest",
    "ManifestEntry",
    "RunConfig",
    "load_manifest",
    "run_batch",
    "write_report",
]
