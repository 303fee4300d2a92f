"""Fixed-rate image streams and the named experiment presets."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import ConfigError
from .schedulers import Task
from .sim_core import ms_to_us

DEFAULT_IMAGE_SIZE_KB = 29.0


@dataclass(frozen=True)
class WorkloadSpec:
    image_count: int
    interval_ms: float
    deadline_ms: float
    source_device: str = "rpi1"
    image_size_kb: float = DEFAULT_IMAGE_SIZE_KB
    start_ms: float = 0.0
    jitter_ms: float = 0.0

    def __post_init__(self):
        if self.image_count <= 0:
            raise ConfigError(f"image_count must be positive, got {self.image_count}")
        if self.interval_ms <= 0:
            raise ConfigError(f"interval_ms must be positive, got {self.interval_ms}")
        if not self.image_size_kb > 0:
            raise ConfigError(f"image_size_kb must be positive, got {self.image_size_kb}")
        if self.deadline_ms < 0:
            raise ConfigError(f"deadline_ms must be non-negative, got {self.deadline_ms}")
        if not 0 <= self.jitter_ms < self.interval_ms:
            raise ConfigError("jitter_ms must be within [0, interval_ms)")


def generate(spec: WorkloadSpec, rng: random.Random | None = None) -> list[Task]:
    """Tasks arriving every ``interval_ms`` starting at ``start_ms``, ids from 1.

    With ``jitter_ms > 0`` each arrival is pushed later by a uniform draw
    from ``[0, jitter_ms)``; since the jitter stays below the interval the
    arrival order is preserved.
    """
    if spec.jitter_ms and rng is None:
        raise ConfigError("jittered workloads need a random source")
    tasks = []
    for k in range(spec.image_count):
        at_ms = spec.start_ms + k * spec.interval_ms
        if spec.jitter_ms:
            at_ms += rng.uniform(0, spec.jitter_ms)
        tasks.append(Task(k + 1, spec.image_size_kb, ms_to_us(at_ms), spec.deadline_ms, spec.source_device))
    return tasks


@dataclass(frozen=True)
class Variant:
    """One curve of a preset: a policy, optionally with the extra worker devices joined."""

    label: str
    policy: str
    with_workers: bool = False


FOUR_POLICIES = (Variant("aor", "aor"), Variant("aoe", "aoe"), Variant("eods", "eods"), Variant("dds", "dds"))


@dataclass(frozen=True)
class Preset:
    name: str
    image_count: int
    interval_ms: float
    axis: str
    values: tuple
    variants: tuple = FOUR_POLICIES
    deadline_ms: float = 5000.0
    note: str = ""


_FIG5_DEADLINES = (200, 500, 1000, 2000, 3000, 5000, 10000)
_FIG6_DEADLINES = (200, 500, 1000, 2000, 5000, 10000, 20000, 30000, 40000, 60000, 80000)

PRESETS = {
    p.name: p
    for p in (
        Preset("fig5a", 50, 50, "deadline_ms", _FIG5_DEADLINES, note="50 images, 50 ms apart"),
        Preset("fig5b", 50, 100, "deadline_ms", _FIG5_DEADLINES, note="50 images, 100 ms apart"),
        Preset("fig5c", 50, 200, "deadline_ms", _FIG5_DEADLINES, note="50 images, 200 ms apart"),
        Preset("fig5d", 50, 500, "deadline_ms", _FIG5_DEADLINES, note="50 images, 500 ms apart"),
        Preset("fig6a", 1000, 50, "deadline_ms", _FIG6_DEADLINES, note="1000 images, 50 ms apart"),
        Preset("fig6b", 1000, 100, "deadline_ms", _FIG6_DEADLINES, note="1000 images, 100 ms apart"),
        Preset(
            "fig8",
            1000,
            50,
            "cpu_load",
            (0.0, 0.25, 0.5, 0.75, 1.0),
            variants=(Variant("dds", "dds"), Variant("dds+worker", "dds", with_workers=True)),
            deadline_ms=5000.0,
            note="1000 images, 50 ms apart, edge CPU load sweep, DDS with and without a second end device",
        ),
    )
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None


def describe_presets() -> str:
    lines = []
    for p in PRESETS.values():
        curves = ",".join(v.label for v in p.variants)
        values = ",".join(f"{v:g}" for v in p.values)
        lines.append(
            f"{p.name}: count={p.image_count} interval={p.interval_ms:g}ms "
            f"sweep {p.axis}=[{values}] deadline={p.deadline_ms:g}ms curves={curves}  # {p.note}"
        )
    return "\n".join(lines)
