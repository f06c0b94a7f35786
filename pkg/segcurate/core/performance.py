"""
Performance Monitoring
Wall-clock accounting per pipeline stage
"""

import logging
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional

logger = logging.getLogger(__name__)


@dataclass
class StageMetric:
    """Single timed stage execution"""
    name: str
    seconds: float
    success: bool = True
    tags: Dict[str, str] = field(default_factory=dict)


class PerformanceMonitor:
    """Collects stage timings for one pipeline run"""

    def __init__(self):
        self.metrics: List[StageMetric] = []
        self.lock = threading.Lock()

    def record(self, name: str, seconds: float, success: bool = True,
               tags: Optional[Dict[str, str]] = None) -> None:
        with self.lock:
            self.metrics.append(StageMetric(name, seconds, success, tags or {}))
        logger.debug(f"Stage {name} took {seconds:.3f}s (success={success})")

    def totals(self) -> Dict[str, float]:
        """Seconds per stage name, summed over repeats"""
        totals: Dict[str, float] = defaultdict(float)
        with self.lock:
            for metric in self.metrics:
                totals[metric.name] += metric.seconds
        return {name: round(seconds, 6) for name, seconds in totals.items()}

    def reset(self) -> None:
        with self.lock:
            self.metrics.clear()


class StageTimer:
    """Context manager timing a block into a PerformanceMonitor"""

    def __init__(self, monitor: PerformanceMonitor, name: str,
                 tags: Optional[Dict[str, str]] = None):
        self.monitor = monitor
        self.name = name
        self.tags = tags or {}
        self.start_time: Optional[float] = None
        self.seconds: float = 0.0

    @property
    def elapsed(self) -> float:
        """Seconds since entry; final once the block has exited"""
        if self.start_time is None:
            return 0.0
        return self.seconds or time.perf_counter() - self.start_time

    def __enter__(self) -> "StageTimer":
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        if self.start_time is not None:
            self.seconds = time.perf_counter() - self.start_time
            self.monitor.record(self.name, self.seconds, exc_type is None, self.tags)
