"""Run provenance: library versions, platform and per-stage wall-clock time."""

import os
import platform
import sys
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from importlib import metadata
from typing import Dict, Iterator, Optional

from loguru import logger

from .models import Provenance

TRACKED_PACKAGES = ("numpy", "scipy", "scikit-learn", "ripser", "pydantic", "matplotlib")


class ProvenanceCollector:
    """Collects metadata about the environment a run executes in."""

    @staticmethod
    def package_versions() -> Dict[str, str]:
        """Versions of the numerical stack; these go into the report."""
        versions = {"python": platform.python_version()}
        for name in TRACKED_PACKAGES:
            try:
                versions[name] = metadata.version(name)
            except metadata.PackageNotFoundError:
                versions[name] = "not installed"
        return versions

    @staticmethod
    def collect_environment(threads: Optional[int] = None) -> Provenance:
        return Provenance(
            started_at=datetime.now(timezone.utc).isoformat(),
            python_version=platform.python_version(),
            platform=platform.platform(),
            packages=ProvenanceCollector.package_versions(),
            cpu_count=os.cpu_count(),
            threads=threads,
            argv=list(sys.argv),
        )


class StageTimer:
    """Accumulates wall-clock seconds per named stage."""

    def __init__(self):
        self.seconds: Dict[str, float] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        logger.info(f"Stage {name} started")
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.seconds[name] = self.seconds.get(name, 0.0) + elapsed
            logger.info(f"Stage {name} finished in {elapsed:.2f}s")
