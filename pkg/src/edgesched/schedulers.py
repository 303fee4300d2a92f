"""Placement policies.

``decide_source`` runs on the end device that captured the image;
``decide_coordinator`` runs on the edge server for every image it receives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

from .errors import ConfigError
from .profiles import DeviceProfile, predict_total_time
from .sim_core import NetworkLink, us_to_ms

if TYPE_CHECKING:
    from .nodes import ContainerPoolState, GlobalProfileTable

AOR = "aor"
AOE = "aoe"
EODS = "eods"
DDS = "dds"
POLICIES = (AOR, AOE, EODS, DDS)


@dataclass(frozen=True)
class Task:
    task_id: int
    size_kb: float
    arrival: int  # microseconds
    deadline_ms: float
    origin: str

    def __post_init__(self):
        if self.task_id < 1:
            raise ValueError("task ids start at 1")
        if not self.size_kb > 0:
            raise ValueError(f"task {self.task_id}: size must be positive")


@dataclass(frozen=True)
class Decision:
    target: str | None = None  # None means run where the task currently is

    @property
    def is_local(self) -> bool:
        return self.target is None

    def __str__(self):
        return "RunLocal" if self.target is None else f"OffloadTo({self.target})"


RUN_LOCAL = Decision()


def offload_to(device_id: str) -> Decision:
    return Decision(device_id)


def check_policy(policy: str) -> str:
    if policy not in POLICIES:
        raise ConfigError(f"unknown policy {policy!r}; expected one of {', '.join(POLICIES)}")
    return policy


def elapsed(task: Task, now: int) -> float:
    """Milliseconds of the deadline budget already consumed at ``now``."""
    if now < task.arrival:
        raise ValueError(f"task {task.task_id} has not arrived yet")
    return us_to_ms(now - task.arrival)


def decide_source(
    policy: str,
    task: Task,
    local_pool: "ContainerPoolState",
    local_profile: DeviceProfile,
    now: int,
    edge_id: str,
) -> Decision:
    check_policy(policy)
    if policy == AOR:
        return RUN_LOCAL
    if policy == AOE:
        return offload_to(edge_id)
    if policy == EODS:
        return RUN_LOCAL if task.task_id % 2 == 1 else offload_to(edge_id)
    predicted = predict_total_time(
        local_profile,
        None,
        running_containers=len(local_pool.busy),
        cpu_load=local_pool.exogenous_cpu_load,
        image_size_kb=task.size_kb,
        queue_depth=len(local_pool.pending),
    )
    # ties stay local
    if predicted <= task.deadline_ms - elapsed(task, now):
        return RUN_LOCAL
    return offload_to(edge_id)


def remote_estimate(
    task: Task,
    device_id: str,
    table: "GlobalProfileTable",
    profiles: Mapping[str, DeviceProfile],
    links: Mapping[str, NetworkLink],
) -> float | None:
    """Predicted milliseconds from the edge server until the result is back at the origin.

    Returns ``None`` when the device's latest snapshot shows no free container.
    """
    snapshot = table.latest[device_id]
    profile = profiles[device_id]
    if snapshot.running_containers >= profile.warm_pool_size:
        return None
    total = predict_total_time(
        profile,
        links[device_id],
        running_containers=snapshot.running_containers,
        cpu_load=snapshot.cpu_load,
        image_size_kb=task.size_kb,
        queue_depth=snapshot.pending_count,
    )
    if task.origin in links:
        total += links[task.origin].delay_ms(profile.result_size_kb)
    return total


def decide_coordinator(
    policy: str,
    task: Task,
    table: "GlobalProfileTable",
    profiles: Mapping[str, DeviceProfile],
    links: Mapping[str, NetworkLink],
    now: int,
    workers: list[str],
) -> Decision:
    """Pick a worker end device for ``task`` or keep it on the edge server.

    Only DDS looks at workers. Among workers whose snapshot shows a free
    container and whose predicted total fits the remaining budget, the one
    with the smallest prediction wins; ties go to the lower device id.
    """
    check_policy(policy)
    if policy != DDS:
        return RUN_LOCAL
    budget = task.deadline_ms - elapsed(task, now)
    best = None
    for device_id in sorted(workers):
        if device_id == task.origin or device_id not in table.latest:
            continue
        estimate = remote_estimate(task, device_id, table, profiles, links)
        if estimate is None or estimate > budget:
            continue
        if best is None or estimate < best[0]:
            best = (estimate, device_id)
    return RUN_LOCAL if best is None else offload_to(best[1])
