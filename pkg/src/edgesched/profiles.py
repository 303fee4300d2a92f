"""Calibrated device timing tables and latency predictions.

All table lookups are piecewise linear and clamp outside the knot range.
Arithmetic runs on :class:`fractions.Fraction` so that every measured knot
is reproduced exactly; results are converted to ``float`` milliseconds only
at the public boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from .sim_core import NetworkLink

EDGE_SERVER = "edge_server"
END_DEVICE = "end_device"
DEVICE_CLASSES = (EDGE_SERVER, END_DEVICE)


class CalibrationError(Exception):
    """A calibration table is empty, malformed, or violates its invariants."""


def _frac(value) -> Fraction:
    # Fraction(str) accepts "284/223" as well as "1.25"
    return value if isinstance(value, Fraction) else Fraction(value)


def interpolate(knots: Sequence[tuple[Fraction, Fraction]], x) -> Fraction:
    """Piecewise-linear lookup over ``(x, y)`` knots sorted by x.

    Inputs left of the first knot or right of the last clamp to that
    knot's value.
    """
    if not knots:
        raise CalibrationError("cannot interpolate over an empty table")
    x = _frac(x)
    if x <= knots[0][0]:
        return knots[0][1]
    if x >= knots[-1][0]:
        return knots[-1][1]
    for (x0, y0), (x1, y1) in zip(knots, knots[1:]):
        if x0 <= x <= x1:
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    raise AssertionError("unreachable: knots not sorted")


def _strictly_increasing(values) -> bool:
    return all(a < b for a, b in zip(values, values[1:]))


@dataclass(frozen=True)
class WarmProfileTable:
    """Average per-image time versus number of concurrently running warm containers."""

    entries: tuple[tuple[int, Fraction, Fraction], ...]

    def __post_init__(self):
        if not self.entries:
            raise CalibrationError("warm table is empty")
        counts = [e[0] for e in self.entries]
        if counts[0] < 1 or not _strictly_increasing(counts):
            raise CalibrationError(f"warm table container counts must be increasing and >= 1: {counts}")
        avgs = [e[1] for e in self.entries]
        if any(b < a for a, b in zip(avgs, avgs[1:])):
            raise CalibrationError("warm table average times must be non-decreasing")

    @classmethod
    def from_rows(cls, rows) -> "WarmProfileTable":
        return cls(tuple((int(n), _frac(avg), _frac(total)) for n, avg, total in rows))

    @property
    def max_containers(self) -> int:
        return self.entries[-1][0]

    def avg_per_image(self, containers) -> Fraction:
        return interpolate([(Fraction(n), avg) for n, avg, _ in self.entries], containers)


@dataclass(frozen=True)
class ColdStartTable:
    entries: tuple[tuple[int, Fraction, Fraction], ...]

    def __post_init__(self):
        if not self.entries:
            raise CalibrationError("cold-start table is empty")
        counts = [e[0] for e in self.entries]
        if counts[0] < 1 or not _strictly_increasing(counts):
            raise CalibrationError(f"cold-start container counts must be increasing and >= 1: {counts}")
        if any(v <= 0 for _, a, b in self.entries for v in (a, b)):
            raise CalibrationError("cold-start durations must be positive")

    @classmethod
    def from_rows(cls, rows) -> "ColdStartTable":
        return cls(tuple((int(n), _frac(old), _frac(new)) for n, old, new in rows))

    def new_container(self, existing) -> Fraction:
        return interpolate([(Fraction(n), new) for n, _, new in self.entries], existing)


@dataclass(frozen=True)
class SizeRuntimeTable:
    entries: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        if not self.entries:
            raise CalibrationError("size table is empty")
        sizes = [s for s, _ in self.entries]
        runtimes = [r for _, r in self.entries]
        if sizes[0] <= 0 or not _strictly_increasing(sizes) or not _strictly_increasing(runtimes):
            raise CalibrationError("size table must be strictly increasing in size and runtime")

    @classmethod
    def from_rows(cls, rows) -> "SizeRuntimeTable":
        return cls(tuple((_frac(s), _frac(r)) for s, r in rows))

    @property
    def reference_size(self) -> Fraction:
        return self.entries[0][0]

    def runtime(self, size_kb) -> Fraction:
        return interpolate(self.entries, size_kb)

    def ratio(self, size_kb) -> Fraction:
        """Runtime at ``size_kb`` relative to the runtime at the smallest measured size."""
        return self.runtime(size_kb) / self.entries[0][1]


@dataclass(frozen=True)
class LoadFactorCurve:
    knots: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        if not self.knots:
            raise CalibrationError("load curve is empty")
        if self.knots[0] != (0, 1):
            raise CalibrationError("load curve must start at (0.0, 1.0)")
        loads = [x for x, _ in self.knots]
        mults = [m for _, m in self.knots]
        if not _strictly_increasing(loads) or loads[-1] > 1:
            raise CalibrationError("load knots must be strictly increasing within [0, 1]")
        if any(b < a for a, b in zip(mults, mults[1:])):
            raise CalibrationError("load multipliers must be non-decreasing")

    @classmethod
    def from_rows(cls, rows) -> "LoadFactorCurve":
        return cls(tuple((_frac(x), _frac(m)) for x, m in rows))

    def multiplier(self, cpu_load) -> Fraction:
        return interpolate(self.knots, cpu_load)


@dataclass(frozen=True)
class DeviceProfile:
    device_id: str
    device_class: str
    warm_table: WarmProfileTable
    cold_table: ColdStartTable
    size_table: SizeRuntimeTable
    load_curve: LoadFactorCurve
    warm_pool_size: int
    uplink_bandwidth_kb_per_ms: float
    result_size_kb: float = 1.0

    def __post_init__(self):
        if self.device_class not in DEVICE_CLASSES:
            raise CalibrationError(f"unknown device class {self.device_class!r}")
        if self.warm_pool_size < 0:
            raise CalibrationError("warm_pool_size must be non-negative")
        if self.warm_pool_size > self.warm_table.max_containers:
            raise CalibrationError(
                f"warm_pool_size {self.warm_pool_size} exceeds calibrated range "
                f"(max {self.warm_table.max_containers} containers)"
            )
        if self.uplink_bandwidth_kb_per_ms <= 0:
            raise CalibrationError("uplink bandwidth must be positive")
        if self.result_size_kb < 0:
            raise CalibrationError("result size must be non-negative")

    def with_overrides(self, **changes) -> "DeviceProfile":
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceProfile":
        try:
            return cls(
                device_id=str(data["device_id"]),
                device_class=data["device_class"],
                warm_table=WarmProfileTable.from_rows(data["warm_table"]),
                cold_table=ColdStartTable.from_rows(data["cold_table"]),
                size_table=SizeRuntimeTable.from_rows(data["size_table"]),
                load_curve=LoadFactorCurve.from_rows(data["load_curve"]),
                warm_pool_size=int(data["warm_pool_size"]),
                uplink_bandwidth_kb_per_ms=float(data["uplink_bandwidth_kb_per_ms"]),
                result_size_kb=float(data.get("result_size_kb", 1.0)),
            )
        except KeyError as exc:
            raise CalibrationError(f"profile is missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise CalibrationError(f"malformed profile: {exc}") from None


def load_profile(path) -> DeviceProfile:
    """Read a device profile from a JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise CalibrationError(f"profile file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"profile file {path} is not valid JSON: {exc}") from None
    return DeviceProfile.from_dict(data)


BUILTIN_PROFILES = {
    "edge_server": "edge_server.json",
    "raspberry_pi": "raspberry_pi.json",
}


def builtin_profile(name: str) -> DeviceProfile:
    """Load one of the profiles shipped with the package (``edge_server``, ``raspberry_pi``)."""
    try:
        filename = BUILTIN_PROFILES[name]
    except KeyError:
        raise CalibrationError(f"no built-in profile named {name!r}") from None
    text = resources.files("edgesched.data").joinpath(filename).read_text()
    return DeviceProfile.from_dict(json.loads(text))


def _check_args(running_containers, cpu_load, image_size_kb):
    if running_containers < 0:
        raise ValueError(f"running_containers must be >= 0, got {running_containers}")
    if not 0 <= cpu_load <= 1:
        raise ValueError(f"cpu_load must be within [0, 1], got {cpu_load}")
    if not image_size_kb > 0:
        raise ValueError(f"image_size_kb must be > 0, got {image_size_kb}")


def process_time_exact(profile: DeviceProfile, running_containers: int, cpu_load, image_size_kb) -> Fraction:
    _check_args(running_containers, cpu_load, image_size_kb)
    base = profile.warm_table.avg_per_image(running_containers + 1)
    return base * profile.size_table.ratio(image_size_kb) * profile.load_curve.multiplier(cpu_load)


def predict_process_time(profile: DeviceProfile, running_containers: int, cpu_load: float, image_size_kb: float) -> float:
    """Predicted milliseconds to process one image on ``profile``'s device.

    The warm-table average at ``running_containers + 1`` is scaled by the
    size-table ratio and by the CPU-load multiplier.
    """
    return float(process_time_exact(profile, running_containers, cpu_load, image_size_kb))


def transfer_time(size_kb: float, link: "NetworkLink") -> float:
    return size_kb / link.bandwidth_kb_per_ms + link.propagation_ms


def predict_total_time(
    profile: DeviceProfile,
    link: "NetworkLink | None",
    running_containers: int,
    cpu_load: float,
    image_size_kb: float,
    queue_depth: int,
) -> float:
    """Predicted end-to-end milliseconds: transfer + queueing + processing + return.

    ``link=None`` means the task is processed where it already is, so both
    network terms are zero.
    """
    if queue_depth < 0:
        raise ValueError(f"queue_depth must be >= 0, got {queue_depth}")
    process = process_time_exact(profile, running_containers, cpu_load, image_size_kb)
    free_slots = max(1, profile.warm_pool_size - running_containers)
    queueing = queue_depth * process / free_slots
    local = float(process + queueing)
    if link is None:
        return local
    return transfer_time(image_size_kb, link) + local + transfer_time(profile.result_size_kb, link)


def cold_start_penalty(profile: DeviceProfile, existing_containers: int) -> float:
    """Milliseconds to bring up one more cold container next to ``existing_containers``."""
    if existing_containers < 0:
        raise ValueError(f"existing_containers must be >= 0, got {existing_containers}")
    return float(profile.cold_table.new_container(existing_containers))
