"""Edge-server and end-device state machines.

Each device owns a pre-warmed container pool. ``available`` holds idle
container ids, ``pending`` holds tasks waiting for one. The edge server also
keeps the coordinator's table of the latest profile snapshot per device.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from .errors import ConfigError
from .profiles import EDGE_SERVER, DeviceProfile, predict_process_time
from .schedulers import Task, check_policy, decide_coordinator, decide_source
from .sim_core import Event, EventKind, EventLoop, Message, NetworkLink, ms_to_us, us_to_ms

logger = logging.getLogger(__name__)

DEFAULT_UPDATE_PERIOD_MS = 20.0
DEFAULT_PROFILE_MESSAGE_KB = 0.1


class PoolStateError(RuntimeError):
    """A container pool was driven into an impossible state."""


@dataclass
class ContainerPoolState:
    warm_pool_size: int
    exogenous_cpu_load: float = 0.0
    available: deque = field(default_factory=deque)
    busy: dict = field(default_factory=dict)  # container id -> (task, completion us)
    pending: deque = field(default_factory=deque)

    @classmethod
    def prewarmed(cls, warm_pool_size: int, exogenous_cpu_load: float = 0.0) -> "ContainerPoolState":
        if not 0 <= exogenous_cpu_load <= 1:
            raise ConfigError(f"cpu load must be within [0, 1], got {exogenous_cpu_load}")
        return cls(warm_pool_size, exogenous_cpu_load, deque(range(warm_pool_size)))

    def running_at(self, now: int) -> int:
        """Containers still working strictly after ``now``."""
        return sum(1 for _, done in self.busy.values() if done > now)

    def check_invariants(self) -> None:
        ids = list(self.available) + list(self.busy)
        if len(ids) != self.warm_pool_size or len(set(ids)) != len(ids):
            raise PoolStateError(f"pool lost track of containers: available={list(self.available)} busy={list(self.busy)}")
        if self.pending and self.available:
            raise PoolStateError("tasks are waiting while containers sit idle")


def _start(pool: ContainerPoolState, container_id: int, task: Task, profile: DeviceProfile, loop: EventLoop, device_id: str):
    running = pool.running_at(loop.now)
    service_ms = predict_process_time(profile, running, pool.exogenous_cpu_load, task.size_kb)
    completion = loop.now + ms_to_us(service_ms)
    pool.busy[container_id] = (task, completion)
    loop.schedule(completion, EventKind.CONTAINER_COMPLETE, (container_id, task), device=device_id, task_id=task.task_id)


def dispatch_or_enqueue(pool: ContainerPoolState, task: Task, profile: DeviceProfile, loop: EventLoop, device_id: str) -> int | None:
    """Hand ``task`` to an idle warm container, or queue it.

    Returns the container id that took the task, or ``None`` if it was queued.
    """
    if not pool.available:
        pool.pending.append(task)
        return None
    container_id = pool.available.popleft()
    _start(pool, container_id, task, profile, loop, device_id)
    return container_id


def on_container_complete(pool: ContainerPoolState, container_id: int, task: Task, profile: DeviceProfile, loop: EventLoop, device_id: str) -> None:
    entry = pool.busy.get(container_id)
    if entry is None or entry[0] is not task:
        raise PoolStateError(f"{device_id}: container {container_id} is not running task {task.task_id}")
    del pool.busy[container_id]
    if pool.pending:
        _start(pool, container_id, pool.pending.popleft(), profile, loop, device_id)
    else:
        pool.available.append(container_id)


@dataclass(frozen=True)
class ProfileSnapshot:
    device_id: str
    running_containers: int
    cpu_load: float
    pending_count: int
    taken_at: int


@dataclass
class GlobalProfileTable:
    latest: dict = field(default_factory=dict)

    def update(self, snapshot: ProfileSnapshot) -> None:
        current = self.latest.get(snapshot.device_id)
        # deliveries can't reorder over one link, but guard anyway
        if current is None or snapshot.taken_at >= current.taken_at:
            self.latest[snapshot.device_id] = snapshot


@dataclass
class Node:
    profile: DeviceProfile
    pool: ContainerPoolState
    link: NetworkLink | None = None  # None for the edge server itself

    @property
    def device_id(self) -> str:
        return self.profile.device_id

    def snapshot(self, now: int) -> ProfileSnapshot:
        return ProfileSnapshot(self.device_id, len(self.pool.busy), self.pool.exogenous_cpu_load, len(self.pool.pending), now)


@dataclass
class Outcome:
    task: Task
    executed_on: str | None = None
    completion: int | None = None
    lost: bool = False

    @property
    def terminal(self) -> bool:
        return self.lost or self.completion is not None


class Cluster:
    """One edge server coordinating any number of end devices.

    Devices join with :meth:`register_device`; tasks enter with
    :meth:`submit`. :meth:`run` drives the event loop until every submitted
    task has either returned its result to its origin or been lost in transit.
    """

    def __init__(
        self,
        edge_profile: DeviceProfile,
        policy: str,
        loop: EventLoop | None = None,
        *,
        edge_cpu_load: float = 0.0,
        update_period_ms: float = DEFAULT_UPDATE_PERIOD_MS,
        profile_message_kb: float = DEFAULT_PROFILE_MESSAGE_KB,
    ):
        if edge_profile.device_class != EDGE_SERVER:
            raise ConfigError(f"{edge_profile.device_id} is not an edge server profile")
        if update_period_ms <= 0:
            raise ConfigError("profile update period must be positive")
        self.policy = check_policy(policy)
        self.loop = loop if loop is not None else EventLoop()
        self.update_period_ms = update_period_ms
        self.profile_message_kb = profile_message_kb
        self.edge_id = edge_profile.device_id
        self.nodes: dict[str, Node] = {}
        self.table = GlobalProfileTable()
        self.outcomes: dict[int, Outcome] = {}
        self._outstanding = 0
        self._ended = False
        for kind, handler in (
            (EventKind.TASK_ARRIVAL, self._on_arrival),
            (EventKind.MESSAGE_DELIVERY, self._on_delivery),
            (EventKind.CONTAINER_COMPLETE, self._on_complete),
            (EventKind.PROFILE_TICK, self._on_tick),
        ):
            self.loop.on(kind, handler)
        self._add_node(edge_profile, None, edge_cpu_load)

    @property
    def edge(self) -> Node:
        return self.nodes[self.edge_id]

    @property
    def profiles(self) -> dict[str, DeviceProfile]:
        return {d: n.profile for d, n in self.nodes.items()}

    @property
    def links(self) -> dict[str, NetworkLink]:
        return {d: n.link for d, n in self.nodes.items() if n.link is not None}

    @property
    def workers(self) -> list[str]:
        return [d for d in self.nodes if d != self.edge_id]

    def _add_node(self, profile: DeviceProfile, link, cpu_load: float) -> Node:
        if profile.device_id in self.nodes:
            raise ConfigError(f"duplicate device id {profile.device_id!r}")
        if profile.warm_pool_size == 0:
            logger.warning("%s has no warm containers; tasks placed there will never run", profile.device_id)
        node = Node(profile, ContainerPoolState.prewarmed(profile.warm_pool_size, cpu_load), link)
        self.nodes[profile.device_id] = node
        self.table.update(node.snapshot(self.loop.now))
        self.loop.schedule(self.loop.now, EventKind.PROFILE_TICK, device=node.device_id)
        return node

    def register_device(self, profile: DeviceProfile, link: NetworkLink | None = None, *, cpu_load: float = 0.0) -> Node:
        """Join an end device; it starts reporting its load right away."""
        if profile.device_class == EDGE_SERVER:
            raise ConfigError(f"{profile.device_id}: only one edge server per cluster")
        if link is None:
            link = NetworkLink(profile.uplink_bandwidth_kb_per_ms)
        return self._add_node(profile, link, cpu_load)

    def submit(self, tasks) -> None:
        for task in tasks:
            if task.origin not in self.nodes:
                raise ConfigError(f"task {task.task_id} originates at unknown device {task.origin!r}")
            if task.task_id in self.outcomes:
                raise ConfigError(f"duplicate task id {task.task_id}")
            self.outcomes[task.task_id] = Outcome(task)
            self._outstanding += 1
            self.loop.schedule(task.arrival, EventKind.TASK_ARRIVAL, task, device=task.origin, task_id=task.task_id)

    def run(self) -> int:
        if self._outstanding == 0:
            self._end()
        return self.loop.run_until_idle()

    # -- bookkeeping ---------------------------------------------------------

    def _end(self):
        if not self._ended:
            self._ended = True
            self.loop.schedule(self.loop.now, EventKind.EXPERIMENT_END)

    def _terminal(self, outcome: Outcome):
        assert not outcome.terminal, f"task {outcome.task.task_id} finished twice"
        self._outstanding -= 1

    def _complete(self, task: Task):
        outcome = self.outcomes[task.task_id]
        self._terminal(outcome)
        outcome.completion = self.loop.now
        if self._outstanding == 0:
            self._end()

    def _lose(self, task: Task):
        outcome = self.outcomes[task.task_id]
        self._terminal(outcome)
        outcome.lost = True
        if self._outstanding == 0:
            self._end()

    def _place(self, node: Node, task: Task):
        self.outcomes[task.task_id].executed_on = node.device_id
        dispatch_or_enqueue(node.pool, task, node.profile, self.loop, node.device_id)

    def _send_image(self, task: Task, src: str, dst: str, link: NetworkLink):
        delivered = self.loop.send(Message("image", src, dst, task), task.size_kb, link, task_id=task.task_id)
        if not delivered:
            self._lose(task)

    def _send_result(self, task: Task, src: str, dst: str, link: NetworkLink, size_kb: float):
        self.loop.send(Message("result", src, dst, task), size_kb, link, lossy=False, task_id=task.task_id)

    # -- event handlers ------------------------------------------------------

    def _on_arrival(self, event: Event):
        task: Task = event.payload
        if task.origin == self.edge_id:
            self._coordinate(task)
            return
        node = self.nodes[task.origin]
        decision = decide_source(self.policy, task, node.pool, node.profile, self.loop.now, self.edge_id)
        if decision.is_local:
            self._place(node, task)
        else:
            self._send_image(task, node.device_id, self.edge_id, node.link)

    def _coordinate(self, task: Task):
        decision = decide_coordinator(self.policy, task, self.table, self.profiles, self.links, self.loop.now, self.workers)
        if decision.is_local:
            self._place(self.edge, task)
        else:
            target = self.nodes[decision.target]
            self._send_image(task, self.edge_id, target.device_id, target.link)

    def _on_delivery(self, event: Event):
        msg: Message = event.payload
        if msg.kind == "profile":
            self.table.update(msg.body)
        elif msg.kind == "image":
            if msg.dst == self.edge_id:
                self._coordinate(msg.body)
            else:
                self._place(self.nodes[msg.dst], msg.body)
        elif msg.kind == "result":
            self._route_result(msg.body, msg.dst)
        else:
            raise ValueError(f"unknown message kind {msg.kind!r}")

    def _route_result(self, task: Task, at: str):
        if at == task.origin:
            self._complete(task)
        elif at == self.edge_id:
            origin = self.nodes[task.origin]
            self._send_result(task, at, origin.device_id, origin.link, self.nodes[self.outcomes[task.task_id].executed_on].profile.result_size_kb)
        else:
            node = self.nodes[at]
            self._send_result(task, at, self.edge_id, node.link, node.profile.result_size_kb)

    def _on_complete(self, event: Event):
        container_id, task = event.payload
        node = self.nodes[event.device]
        on_container_complete(node.pool, container_id, task, node.profile, self.loop, node.device_id)
        self._route_result(task, node.device_id)

    def _on_tick(self, event: Event):
        node = self.nodes[event.device]
        snapshot = node.snapshot(self.loop.now)
        if node.link is None:
            self.table.update(snapshot)
        else:
            msg = Message("profile", node.device_id, self.edge_id, snapshot)
            self.loop.send(msg, self.profile_message_kb, node.link, lossy=False)
        self.loop.schedule_in(self.update_period_ms, EventKind.PROFILE_TICK, device=node.device_id)

    # -- reporting -----------------------------------------------------------

    def check_invariants(self) -> None:
        for node in self.nodes.values():
            node.pool.check_invariants()
            if len(node.pool.busy) > node.profile.warm_pool_size:
                raise PoolStateError(f"{node.device_id} exceeded its warm pool")

    def staleness_ms(self, device_id: str) -> float:
        return us_to_ms(self.loop.now - self.table.latest[device_id].taken_at)
