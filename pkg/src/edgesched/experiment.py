"""Experiment configuration and the single-run driver."""

from __future__ import annotations

import json
import random
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .metrics import SWEEP_AXES, ExperimentResult, TaskRecord, summarize
from .nodes import DEFAULT_PROFILE_MESSAGE_KB, DEFAULT_UPDATE_PERIOD_MS, Cluster
from .profiles import BUILTIN_PROFILES, EDGE_SERVER, CalibrationError, DeviceProfile, builtin_profile, load_profile
from .schedulers import POLICIES, check_policy
from .sim_core import EventLoop, NetworkLink, us_to_ms
from .workload import FOUR_POLICIES, Variant, WorkloadSpec, generate, get_preset

ROLES = ("edge", "source", "worker")
DEFAULT_PROPAGATION_MS = 2.0


@dataclass(frozen=True)
class DeviceConfig:
    device_id: str
    role: str
    profile: str  # built-in profile name or path to a profile file
    warm_pool_size: int | None = None
    cpu_load: float = 0.0
    bandwidth_kb_per_ms: float | None = None
    propagation_ms: float = DEFAULT_PROPAGATION_MS
    loss_probability: float = 0.0

    def load(self, base_dir: Path | None = None) -> DeviceProfile:
        if self.profile in BUILTIN_PROFILES:
            profile = builtin_profile(self.profile)
        else:
            path = Path(self.profile)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            profile = load_profile(path)
        changes = {"device_id": self.device_id}
        if self.warm_pool_size is not None:
            changes["warm_pool_size"] = self.warm_pool_size
        try:
            return profile.with_overrides(**changes)
        except CalibrationError as exc:
            raise CalibrationError(f"{self.device_id}: {exc}") from None

    def link(self, profile: DeviceProfile) -> NetworkLink:
        bandwidth = self.bandwidth_kb_per_ms or profile.uplink_bandwidth_kb_per_ms
        try:
            return NetworkLink(bandwidth, self.propagation_ms, self.loss_probability)
        except ValueError as exc:
            raise ConfigError(f"{self.device_id}: {exc}") from None


DEFAULT_TOPOLOGY = (
    DeviceConfig("edge", "edge", "edge_server"),
    DeviceConfig("rpi1", "source", "raspberry_pi"),
    DeviceConfig("rpi2", "worker", "raspberry_pi"),
)


def validate_topology(devices) -> None:
    ids = [d.device_id for d in devices]
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if duplicates:
        raise ConfigError(f"duplicate device ids: {', '.join(duplicates)}")
    unknown = [d.role for d in devices if d.role not in ROLES]
    if unknown:
        raise ConfigError(f"unknown device roles: {', '.join(unknown)}; expected one of {', '.join(ROLES)}")
    edges = [d for d in devices if d.role == "edge"]
    if len(edges) != 1:
        raise ConfigError(f"topology needs exactly one edge server, found {len(edges)}")
    for d in devices:
        if not 0 <= d.cpu_load <= 1:
            raise ConfigError(f"{d.device_id}: cpu_load must be within [0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    workload: WorkloadSpec
    policy: str = "dds"
    devices: tuple = DEFAULT_TOPOLOGY
    with_workers: bool = False
    seed: int = 0
    update_period_ms: float = DEFAULT_UPDATE_PERIOD_MS
    profile_message_kb: float = DEFAULT_PROFILE_MESSAGE_KB
    lost_as_missed: bool = True
    trace: bool = False
    base_dir: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        check_policy(self.policy)
        validate_topology(self.devices)
        ids = {d.device_id for d in self.devices if d.role != "worker" or self.with_workers}
        if self.workload.source_device not in ids:
            raise ConfigError(f"workload source {self.workload.source_device!r} is not an edge or source device")

    @property
    def edge(self) -> DeviceConfig:
        return next(d for d in self.devices if d.role == "edge")

    def for_variant(self, variant: Variant) -> "ExperimentConfig":
        return replace(self, policy=variant.policy, with_workers=variant.with_workers)

    def with_axis(self, axis: str, value) -> "ExperimentConfig":
        if axis == "deadline_ms":
            return replace(self, workload=replace(self.workload, deadline_ms=float(value)))
        if axis == "cpu_load":
            devices = tuple(replace(d, cpu_load=float(value)) if d.role == "edge" else d for d in self.devices)
            return replace(self, devices=devices)
        raise ConfigError(f"unknown sweep axis {axis!r}")

    def echo(self) -> dict:
        data = asdict(self)
        data.pop("base_dir")
        return data


def run_experiment(config: ExperimentConfig, *, observer=None) -> ExperimentResult:
    """Build the topology, stream the workload through it and summarize.

    ``observer(cluster, event)`` is called after every dispatched event.
    """
    loop = EventLoop(seed=config.seed, trace=config.trace)
    edge_cfg = config.edge
    cluster = Cluster(
        edge_cfg.load(config.base_dir),
        config.policy,
        loop,
        edge_cpu_load=edge_cfg.cpu_load,
        update_period_ms=config.update_period_ms,
        profile_message_kb=config.profile_message_kb,
    )
    for dev in config.devices:
        if dev.role == "edge" or (dev.role == "worker" and not config.with_workers):
            continue
        profile = dev.load(config.base_dir)
        if profile.device_class == EDGE_SERVER:
            raise ConfigError(f"{dev.device_id}: edge server profile used for a {dev.role} device")
        cluster.register_device(profile, dev.link(profile), cpu_load=dev.cpu_load)
    if observer is not None:
        loop.observers.append(lambda _loop, event: observer(cluster, event))
    # separate stream so jitter never shifts the loss draws
    tasks = generate(config.workload, random.Random(f"workload-{config.seed}"))
    cluster.submit(tasks)
    started = time.perf_counter()
    cluster.run()
    wall = time.perf_counter() - started
    records = [
        TaskRecord(
            task_id=o.task.task_id,
            arrival_ms=us_to_ms(o.task.arrival),
            deadline_ms=o.task.deadline_ms,
            completion_ms=None if o.completion is None else us_to_ms(o.completion),
            executed_on=o.executed_on,
        )
        for o in cluster.outcomes.values()
    ]
    result = summarize(records, lost_as_missed=config.lost_as_missed, config=config.echo())
    result.wall_clock_s = wall
    result.trace = loop.trace
    return result


# -- config files ------------------------------------------------------------

_DEVICE_KEYS = {f for f in DeviceConfig.__dataclass_fields__}
_WORKLOAD_KEYS = {f for f in WorkloadSpec.__dataclass_fields__}
_TOP_KEYS = {
    "preset", "policy", "policies", "workload", "deadline_ms", "sweep", "topology",
    "with_workers", "seed", "update_period_ms", "profile_message_kb", "lost_as_missed",
    "output_dir", "trace",
}


@dataclass(frozen=True)
class RunPlan:
    """Everything the CLI needs: the base config plus which curves and sweep points to run."""

    base: ExperimentConfig
    variants: tuple
    axis: str
    values: tuple
    output_dir: Path


def _check_keys(section: str, data: dict, allowed: set) -> None:
    extra = sorted(set(data) - allowed)
    if extra:
        raise ConfigError(f"{section}: unknown keys {', '.join(extra)}")


def _device(data: dict) -> DeviceConfig:
    if not isinstance(data, dict):
        raise ConfigError("topology entries must be objects")
    _check_keys(f"device {data.get('device_id', '?')}", data, _DEVICE_KEYS)
    try:
        return DeviceConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"device entry: {exc}") from None


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a JSON object")
    return data


def build_plan(data: dict, *, base_dir: Path | None = None, preset: str | None = None, policy: str | None = None,
               seed: int | None = None, output_dir: str | None = None, trace: bool = False) -> RunPlan:
    """Merge built-in defaults, the named preset, the config file and CLI flags (later wins)."""
    _check_keys("config", data, _TOP_KEYS)
    preset_name = preset or data.get("preset")
    p = get_preset(preset_name) if preset_name else None

    workload = {"image_count": 50, "interval_ms": 50, "deadline_ms": 5000.0}
    if p is not None:
        workload.update(image_count=p.image_count, interval_ms=p.interval_ms, deadline_ms=p.deadline_ms)
    if "deadline_ms" in data:
        workload["deadline_ms"] = data["deadline_ms"]
    wl = data.get("workload", {})
    if not isinstance(wl, dict):
        raise ConfigError("workload must be an object")
    _check_keys("workload", wl, _WORKLOAD_KEYS)
    workload.update(wl)

    variants = p.variants if p is not None else FOUR_POLICIES
    workers = bool(data.get("with_workers", False))
    if "policies" in data:
        variants = tuple(Variant(name, name, workers) for name in data["policies"])
    if "policy" in data:
        variants = (Variant(data["policy"], data["policy"], workers),)
    if policy is not None:
        matching = tuple(v for v in variants if v.label == policy)
        variants = matching or (Variant(policy, policy, workers),)
    for v in variants:
        if v.policy not in POLICIES:
            raise ConfigError(f"unknown policy {v.policy!r}; expected one of {', '.join(POLICIES)}")

    axis, values = None, ()
    if p is not None:
        axis, values = p.axis, tuple(p.values)
    if "sweep" in data:
        sw = data["sweep"]
        if sw is None:
            axis, values = None, ()
        else:
            if not isinstance(sw, dict) or set(sw) != {"axis", "values"}:
                raise ConfigError("sweep must be an object with 'axis' and 'values', or null")
            axis, values = sw["axis"], tuple(sw["values"])
            if axis not in SWEEP_AXES:
                raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")
            if not values:
                raise ConfigError("sweep values must be non-empty")
    if axis is None:
        axis, values = "deadline_ms", (float(workload["deadline_ms"]),)

    devices = DEFAULT_TOPOLOGY
    if "topology" in data:
        if not isinstance(data["topology"], list):
            raise ConfigError("topology must be a list of devices")
        devices = tuple(_device(d) for d in data["topology"])

    try:
        spec = WorkloadSpec(**workload)
        base = ExperimentConfig(
            workload=spec,
            policy=variants[0].policy,
            devices=devices,
            with_workers=variants[0].with_workers,
            seed=int(seed if seed is not None else data.get("seed", 0)),
            update_period_ms=float(data.get("update_period_ms", DEFAULT_UPDATE_PERIOD_MS)),
            profile_message_kb=float(data.get("profile_message_kb", DEFAULT_PROFILE_MESSAGE_KB)),
            lost_as_missed=bool(data.get("lost_as_missed", True)),
            trace=trace or bool(data.get("trace", False)),
            base_dir=base_dir,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from None
    # fail on unreadable profiles before any run starts
    for dev in devices:
        dev.load(base_dir)
    out = Path(output_dir or data.get("output_dir", "results"))
    if base_dir is not None and not out.is_absolute() and output_dir is None:
        out = base_dir / out
    return RunPlan(base, variants, axis, values, out)
