"""Timing utilities for commands and training epochs."""

import functools
import logging
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional

logger = logging.getLogger(__name__)

SLOW_OPERATION_SECONDS = 60.0


@dataclass
class PerformanceMetrics:
    """Timing metrics for one named operation."""

    operation_name: str
    total_calls: int = 0
    total_time: float = 0.0
    min_time: float = float("inf")
    max_time: float = 0.0
    error_count: int = 0
    recent_times: List[float] = field(default_factory=list)

    @property
    def average_time(self) -> float:
        return self.total_time / self.total_calls if self.total_calls > 0 else 0.0

    def add_measurement(self, execution_time: float, success: bool = True) -> None:
        self.total_calls += 1
        self.total_time += execution_time
        self.min_time = min(self.min_time, execution_time)
        self.max_time = max(self.max_time, execution_time)

        if not success:
            self.error_count += 1

        self.recent_times.append(execution_time)
        if len(self.recent_times) > 100:
            self.recent_times.pop(0)


class PerformanceMonitor:
    """Process-wide registry of operation timings."""

    def __init__(self) -> None:
        self.metrics: Dict[str, PerformanceMetrics] = {}
        self._lock = threading.Lock()

    def record_operation(
        self, operation_name: str, execution_time: float, success: bool = True
    ) -> None:
        """Record one timed call of an operation."""
        with self._lock:
            if operation_name not in self.metrics:
                self.metrics[operation_name] = PerformanceMetrics(operation_name)
            self.metrics[operation_name].add_measurement(execution_time, success)

        if execution_time > SLOW_OPERATION_SECONDS:
            logger.warning(
                f"Slow operation detected: {operation_name} took {execution_time:.2f}s"
            )

    def get_detailed_metrics(self) -> Dict[str, Dict[str, Any]]:
        """Per-operation call counts, timings and failures."""
        with self._lock:
            return {
                name: {
                    "total_calls": metrics.total_calls,
                    "average_time": metrics.average_time,
                    "min_time": metrics.min_time if metrics.total_calls else 0.0,
                    "max_time": metrics.max_time,
                    "error_count": metrics.error_count,
                }
                for name, metrics in self.metrics.items()
            }


performance_monitor = PerformanceMonitor()


def performance_tracked(operation_name: Optional[str] = None) -> Callable:
    """Decorator recording the wall time of every call."""

    def decorator(func: Callable) -> Callable:
        name = operation_name or f"{func.__module__}.{func.__name__}"

        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            start_time = time.perf_counter()
            success = True
            try:
                return func(*args, **kwargs)
            except Exception:
                success = False
                raise
            finally:
                performance_monitor.record_operation(
                    name, time.perf_counter() - start_time, success
                )

        return wrapper

    return decorator


@contextmanager
def performance_context(operation_name: str) -> Iterator[None]:
    """Context manager timing a block of code."""
    start_time = time.perf_counter()
    success = True
    try:
        yield
    except Exception:
        success = False
        raise
    finally:
        performance_monitor.record_operation(
            operation_name, time.perf_counter() - start_time, success
        )


def get_performance_report() -> Dict[str, Any]:
    """Timing report embedded in run manifests."""
    return {"operations": performance_monitor.get_detailed_metrics()}
