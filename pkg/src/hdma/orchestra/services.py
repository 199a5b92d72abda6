"""
The five services of the reference procedure plus the requesting application.

Message flow for the quantum route, one correlation id per workflow::

    Application    --M1-->  Decision
    Decision       --M1r->  Application
    Application    --M2-->  Data
    Data           --M2r->  Application
    Application    --M3-->  Circuit
    Circuit        --M3r->  Application
    Application    --M4-->  Backend      (submits each circuit to the adapter)
    Backend        --M6-->  ResultManager (polls the adapter, fetches counts)
    ResultManager  --M8-->  Application and/or Data (+ Backend for job bookkeeping)

On the classical route the Application exchanges data with the Data Service
directly (M9) after M1r.
"""
from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

from .. import datastore, distest, qcir
from ..distest import Assignment, DistanceEstimate, PairSpec
from ..encode import Profile, validate
from ..errors import OrchestrationError
from ..qsim import CountsMap
from .backends import (
    BackendAdapter, BackendError, JobRecord, JobState, JobStatus, LocalSimulatorBackend, derive_seed,
)
from .bus import MessageBus
from .messages import Message, MessageKind, TraceEntry

logger = logging.getLogger(__name__)

__all__ = [
    "Route", "Sinks", "ProblemRequest", "WorkflowConfig", "WorkflowResult", "ResultNotice", "CircuitTask",
    "UnknownProblemKind", "BackendUnavailable", "JobFailed", "PollTimeout", "WorkflowFailed", "SinkUnavailable",
    "decide", "submit_batch", "poll_collect", "notify_results",
    "WorkflowMonitor", "Application", "DecisionService", "DataService", "CircuitService",
    "BackendService", "ResultManager",
]

CLUSTER_ASSIGNMENT = "cluster-assignment"

APPLICATION, DECISION, DATA, CIRCUIT, BACKEND, RESULT_MANAGER = (
    "application", "decision", "data", "circuit", "backend", "result_manager",
)


class UnknownProblemKind(OrchestrationError, ValueError):
    pass


class BackendUnavailable(OrchestrationError):
    def __init__(self, message: str, jobs: Sequence[JobRecord] = ()):
        super().__init__(message)
        self.jobs = list(jobs)


class JobFailed(OrchestrationError):
    def __init__(self, job_id: str, statuses: dict[str, JobStatus] | None = None):
        super().__init__(f"job {job_id} failed")
        self.job_id = job_id
        self.statuses = statuses or {}


class PollTimeout(OrchestrationError, TimeoutError):
    def __init__(self, unfinished: Sequence[str], statuses: dict[str, JobStatus] | None = None):
        super().__init__(f"timed out waiting for jobs {list(unfinished)}")
        self.unfinished = list(unfinished)
        self.statuses = statuses or {}


class WorkflowFailed(OrchestrationError):
    pass


class SinkUnavailable(OrchestrationError):
    pass


class Route(str, Enum):
    QUANTUM = "quantum"
    CLASSICAL = "classical"


class Sinks(str, Enum):
    APPLICATION = "application"
    DATASTORE = "datastore"
    BOTH = "both"

    @property
    def topics(self) -> list[str]:
        return {
            Sinks.APPLICATION: [APPLICATION], Sinks.DATASTORE: [DATA], Sinks.BOTH: [APPLICATION, DATA],
        }[self]

    @property
    def writes_back(self) -> bool:
        return self is not Sinks.APPLICATION


@dataclass(frozen=True)
class ProblemRequest:
    data_path: str | Path
    kind: str = CLUSTER_ASSIGNMENT
    profile: Profile | str | Path | None = None

    def load_profile(self) -> Profile:
        if isinstance(self.profile, Profile):
            return self.profile
        if self.profile is None:
            return Profile()
        return Profile.load(self.profile)


@dataclass
class WorkflowConfig:
    backend: BackendAdapter = field(default_factory=LocalSimulatorBackend)
    shots: int | None = None  # overrides profile.shots
    seed: int = 0
    sinks: Sinks = Sinks.APPLICATION
    output_path: str | Path | None = None  # write-back target, defaults to the data file
    poll_interval: float = 0.1
    timeout: float = 30.0
    submit_attempts: int = 3
    allowed_kinds: tuple[str, ...] = (CLUSTER_ASSIGNMENT,)

    def __post_init__(self):
        self.sinks = Sinks(self.sinks)
        if self.shots is not None and self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")
        if self.submit_attempts < 1:
            raise ValueError("submit_attempts must be >= 1")


@dataclass(frozen=True)
class CircuitTask:
    pair: PairSpec
    text: str

    @property
    def point_id(self) -> int:
        return self.pair.point.id

    @property
    def centroid_id(self) -> int:
        return self.pair.centroid.id


@dataclass(frozen=True)
class ResultNotice:
    ok: bool
    estimates: tuple[DistanceEstimate, ...] = ()
    assignments: tuple[Assignment, ...] = ()
    job_outcomes: tuple[tuple[str, JobStatus, CountsMap | None], ...] = ()
    error: str | None = None


@dataclass
class WorkflowResult:
    correlation_id: str
    route: Route
    assignments: list[Assignment]
    table: datastore.Table
    trace: list[TraceEntry]
    estimates: list[DistanceEstimate] = field(default_factory=list)
    jobs: list[JobRecord] = field(default_factory=list)

    @property
    def labels(self) -> dict[int, str]:
        return {a.point_id: a.cluster_label for a in self.assignments}


# --- service-independent operations --------------------------------------------------


def decide(
    problem: ProblemRequest,
    profile: Profile,
    table: datastore.Table | None = None,
    allowed_kinds: Iterable[str] = (CLUSTER_ASSIGNMENT,),
) -> Route:
    if problem.kind not in tuple(allowed_kinds):
        raise UnknownProblemKind(f"unknown problem kind {problem.kind!r}")
    if table is None:
        table = datastore.load(problem.data_path)
    if len(table.unassigned) > profile.max_points or validate(table, profile):
        return Route.CLASSICAL
    return Route.QUANTUM


def submit_batch(
    circuits: Sequence[str],
    backend: BackendAdapter,
    shots: int = 1000,
    seeds: Sequence[int | None] | None = None,
    attempts: int = 3,
) -> list[JobRecord]:
    """Submit every circuit; each one gets up to ``attempts`` tries.

    Raises BackendUnavailable after trying all circuits if any stayed
    unsubmitted; the exception carries every JobRecord.
    """
    seeds = list(seeds) if seeds is not None else [None] * len(circuits)
    if len(seeds) != len(circuits):
        raise ValueError("one seed per circuit is required")
    jobs = [JobRecord(text) for text in circuits]
    for job, seed in zip(jobs, seeds):
        while job.state is JobState.CREATED and job.attempts < attempts:
            job.attempts += 1
            try:
                job.job_id = backend.submit_job(job.circuit_text, shots, seed)
            except BackendError as exc:
                job.error = str(exc)
                continue
            job.error = None
            job.advance(JobState.SUBMITTED)
    failed = [i for i, j in enumerate(jobs) if j.state is JobState.CREATED]
    if failed:
        raise BackendUnavailable(
            f"{len(failed)} circuit(s) not accepted after {attempts} attempt(s): positions {failed}", jobs
        )
    return jobs


async def poll_collect(
    job_ids: Sequence[str],
    backend: BackendAdapter,
    poll_interval: float = 0.1,
    timeout: float = 30.0,
    fetched: dict[str, CountsMap] | None = None,
) -> list[tuple[str, CountsMap]]:
    """Poll until every job is terminal, fetching each result exactly once.

    ``fetched`` caches results across calls, so a retried collection never
    fetches a job's counts twice.
    """
    fetched = {} if fetched is None else fetched
    statuses: dict[str, JobStatus] = {}
    deadline = time.monotonic() + timeout
    pending = [j for j in dict.fromkeys(job_ids) if j not in fetched]
    while True:
        for job_id in list(pending):
            status = backend.job_status(job_id)
            statuses[job_id] = status
            if status is JobStatus.FAILED:
                raise JobFailed(job_id, statuses)
            if status is JobStatus.DONE:
                fetched[job_id] = backend.job_result(job_id)
                pending.remove(job_id)
        if not pending:
            return [(j, fetched[j]) for j in job_ids]
        if time.monotonic() >= deadline:
            raise PollTimeout(pending, statuses)
        await asyncio.sleep(min(poll_interval, max(0.0, deadline - time.monotonic())))


def notify_results(
    bus: MessageBus, correlation_id: str, notice: ResultNotice, sinks: Sinks, sender: str = RESULT_MANAGER
) -> Message:
    """Publish one M8 to the chosen sinks; the Backend Service also listens for job bookkeeping."""
    msg = Message(MessageKind.M8_ResultNotice, correlation_id, notice, sender=sender)
    bus.publish([*Sinks(sinks).topics, BACKEND], msg)
    return msg


# --- workflow state ---------------------------------------------------------------


@dataclass
class _Workflow:
    problem: ProblemRequest
    config: WorkflowConfig
    future: asyncio.Future
    state: str = "pending"
    route: Route | None = None
    profile: Profile | None = None
    table: datastore.Table | None = None
    updated_table: datastore.Table | None = None
    notice: ResultNotice | None = None
    assignments: list[Assignment] = field(default_factory=list)
    pending_sinks: set[str] = field(default_factory=set)
    error: str | None = None


class WorkflowMonitor:
    """Completion bookkeeping for the caller. Services report into it; it never drives them."""

    def __init__(self, bus: MessageBus):
        self.bus = bus
        self.workflows: dict[str, _Workflow] = {}
        self.jobs: dict[str, list[JobRecord]] = {}

    def register(self, correlation_id: str, problem: ProblemRequest, config: WorkflowConfig) -> _Workflow:
        wf = _Workflow(problem, config, asyncio.get_running_loop().create_future())
        self.workflows[correlation_id] = wf
        return wf

    def get(self, correlation_id: str) -> _Workflow:
        return self.workflows[correlation_id]

    def fail(self, correlation_id: str, error: str) -> None:
        wf = self.workflows[correlation_id]
        if wf.future.done():
            return
        wf.state, wf.error = "failed", error
        wf.future.set_exception(WorkflowFailed(error))

    def sink_done(self, correlation_id: str, sink: str) -> None:
        wf = self.workflows[correlation_id]
        wf.pending_sinks.discard(sink)
        if wf.pending_sinks or wf.future.done():
            return
        if wf.notice is not None and not wf.notice.ok:
            self.fail(correlation_id, wf.notice.error or "workflow failed")
            return
        self.finish(correlation_id)

    def finish(self, correlation_id: str) -> None:
        wf = self.workflows[correlation_id]
        if wf.future.done():
            return
        wf.state = "done"
        wf.future.set_result(WorkflowResult(
            correlation_id=correlation_id,
            route=wf.route,
            assignments=list(wf.assignments),
            table=wf.updated_table if wf.updated_table is not None else wf.table,
            trace=self.bus.trace.for_correlation(correlation_id),
            estimates=list(wf.notice.estimates) if wf.notice else [],
            jobs=list(self.jobs.get(correlation_id, [])),
        ))


# --- services ---------------------------------------------------------------------


class Service:
    """Consumes one topic; redelivered messages (same msg_id) are ignored."""

    name = "service"

    def __init__(self, bus: MessageBus, monitor: WorkflowMonitor):
        self.bus = bus
        self.monitor = monitor
        self._seen: set[str] = set()
        self.duplicates_ignored = 0

    def start(self) -> None:
        self.bus.subscribe(self.name, self._dispatch)

    async def _dispatch(self, msg: Message) -> None:
        if msg.msg_id in self._seen:
            self.duplicates_ignored += 1
            return
        self._seen.add(msg.msg_id)
        try:
            await self.handle(msg)
        except Exception as exc:
            logger.exception("%s failed handling %s", self.name, msg.kind.value)
            self.monitor.fail(msg.correlation_id, f"{self.name}: {exc}")

    async def handle(self, msg: Message) -> None:
        raise NotImplementedError

    def send(self, topic: str, kind: MessageKind, correlation_id: str, payload: Any = None) -> Message:
        msg = Message(kind, correlation_id, payload, sender=self.name)
        self.bus.publish(topic, msg)
        return msg


class DecisionService(Service):
    name = DECISION

    async def handle(self, msg: Message) -> None:
        if msg.kind is not MessageKind.M1_ProblemRequest:
            return
        wf = self.monitor.get(msg.correlation_id)
        problem, config = msg.payload
        try:
            profile = problem.load_profile()
            route = decide(problem, profile, allowed_kinds=config.allowed_kinds)
            payload = {"route": route, "profile": profile, "error": None}
        except Exception as exc:  # the requester is told either way
            payload = {"route": None, "profile": None, "error": f"{type(exc).__name__}: {exc}"}
        wf.route = payload["route"]
        self.send(APPLICATION, MessageKind.M1r_DecisionNotice, msg.correlation_id, payload)


class DataService(Service):
    """Sole writer of table files. Loads per request; never caches across workflows."""

    name = DATA

    async def handle(self, msg: Message) -> None:
        if msg.kind is MessageKind.M2_DataExtract:
            self._extract(msg)
        elif msg.kind is MessageKind.M8_ResultNotice:
            self._store_results(msg)

    def _extract(self, msg: Message) -> None:
        data_path, profile = msg.payload
        try:
            table = datastore.load(data_path)
            centroids, points = datastore.extract(table, profile)
            payload = {"table": table, "centroids": centroids, "points": points, "error": None}
        except Exception as exc:
            payload = {"error": f"{type(exc).__name__}: {exc}"}
        self.send(APPLICATION, MessageKind.M2r_DataSet, msg.correlation_id, payload)

    def _output_path(self, wf: _Workflow) -> Path:
        return Path(wf.config.output_path or wf.problem.data_path)

    def _write_back(self, wf: _Workflow, assignments: Iterable[Assignment]) -> datastore.Table:
        table = datastore.load(wf.problem.data_path)
        for a in assignments:
            table = datastore.update_cluster(table, a.point_id, a.cluster_label)
        try:
            datastore.persist(table, self._output_path(wf))
        except OSError as exc:
            raise SinkUnavailable(f"cannot write {self._output_path(wf)}: {exc}") from exc
        return table

    def _store_results(self, msg: Message) -> None:
        notice: ResultNotice = msg.payload
        wf = self.monitor.get(msg.correlation_id)
        wf.notice = notice
        if notice.ok:
            wf.assignments = list(notice.assignments)
            try:
                wf.updated_table = self._write_back(wf, notice.assignments)
            except SinkUnavailable as exc:
                self.monitor.fail(msg.correlation_id, str(exc))
                return
        self.monitor.sink_done(msg.correlation_id, DATA)

    def classical_exchange(self, correlation_id: str, problem: ProblemRequest, sinks: Sinks) -> list[Assignment]:
        """M9: extract every unassigned point, label it by nearest centroid, optionally write back."""
        self.bus.trace.record(APPLICATION, MessageKind.M9_ClassicalExchange, correlation_id)
        wf = self.monitor.get(correlation_id)
        table = datastore.load(problem.data_path)
        wf.table = table
        centroids = [datastore.to_centroid(r) for r in table.centroids]
        points = [datastore.to_point(r) for r in table.unassigned]
        assignments = distest.classical_assign(points, centroids)
        if sinks.writes_back:
            wf.updated_table = self._write_back(wf, assignments)
        return assignments


class CircuitService(Service):
    name = CIRCUIT

    async def handle(self, msg: Message) -> None:
        if msg.kind is not MessageKind.M3_CircuitGen:
            return
        centroids, points, profile = msg.payload
        profile = distest.fix_id_width(profile, [n.id for n in (*centroids, *points)])
        tasks = [
            CircuitTask(pair, qcir.serialize(distest.build_pair_circuit(pair, profile)))
            for pair in distest.pairs_for(points, centroids)
        ]
        self.send(APPLICATION, MessageKind.M3r_CircuitBatch, msg.correlation_id, tasks)


class BackendService(Service):
    """Owns the JobRecords; reconciles them from the M8 job outcomes."""

    name = BACKEND

    def __init__(self, bus: MessageBus, monitor: WorkflowMonitor):
        super().__init__(bus, monitor)
        self.jobs: dict[str, list[JobRecord]] = {}

    async def handle(self, msg: Message) -> None:
        if msg.kind is MessageKind.M4_Submit:
            self._submit(msg)
        elif msg.kind is MessageKind.M8_ResultNotice:
            self._reconcile(msg)

    def _submit(self, msg: Message) -> None:
        tasks: list[CircuitTask] = msg.payload["tasks"]
        config: WorkflowConfig = msg.payload["config"]
        shots: int = msg.payload["shots"]
        seeds = [derive_seed(config.seed, t.point_id, t.centroid_id) for t in tasks]
        try:
            jobs = submit_batch([t.text for t in tasks], config.backend, shots, seeds, config.submit_attempts)
        except BackendUnavailable as exc:
            self.jobs[msg.correlation_id] = exc.jobs
            self.monitor.jobs[msg.correlation_id] = exc.jobs
            notify_results(self.bus, msg.correlation_id, ResultNotice(ok=False, error=str(exc)),
                           config.sinks, sender=self.name)
            return
        self.jobs[msg.correlation_id] = jobs
        self.monitor.jobs[msg.correlation_id] = jobs
        watch = [(job.job_id, task.pair) for job, task in zip(jobs, tasks)]
        self.send(RESULT_MANAGER, MessageKind.M6_Watch, msg.correlation_id,
                  {"watch": watch, "config": config, "shots": shots})

    def _reconcile(self, msg: Message) -> None:
        notice: ResultNotice = msg.payload
        by_id = {j.job_id: j for j in self.jobs.get(msg.correlation_id, []) if j.job_id}
        for job_id, status, counts in notice.job_outcomes:
            job = by_id.get(job_id)
            if job is None or job.state in (JobState.DONE, JobState.FAILED):
                continue
            if status is JobStatus.DONE:
                job.advance(JobState.DONE, counts)
            elif status is JobStatus.FAILED:
                job.advance(JobState.FAILED)
            elif status is JobStatus.RUNNING:
                job.advance(JobState.RUNNING)
        self.monitor.sink_done(msg.correlation_id, BACKEND)


class ResultManager(Service):
    """Watches submitted jobs through the adapter only; one polling task per workflow."""

    name = RESULT_MANAGER

    def __init__(self, bus: MessageBus, monitor: WorkflowMonitor):
        super().__init__(bus, monitor)
        self._tasks: set[asyncio.Task] = set()
        self._fetched: dict[str, dict[str, CountsMap]] = {}

    async def handle(self, msg: Message) -> None:
        if msg.kind is not MessageKind.M6_Watch:
            return
        task = asyncio.get_running_loop().create_task(self._collect(msg))
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)

    async def _collect(self, msg: Message) -> None:
        watch: list[tuple[str, PairSpec]] = msg.payload["watch"]
        config: WorkflowConfig = msg.payload["config"]
        job_ids = [job_id for job_id, _ in watch]
        fetched = self._fetched.setdefault(msg.correlation_id, {})
        try:
            results = dict(await poll_collect(job_ids, config.backend, config.poll_interval, config.timeout, fetched))
            estimates = [distest.estimate(results[job_id], pair) for job_id, pair in watch]
            centroids = {pair.centroid.id: pair.centroid for _, pair in watch}
            assignments = distest.assign_clusters(estimates, list(centroids.values())) if estimates else []
            notice = ResultNotice(
                ok=True,
                estimates=tuple(estimates),
                assignments=tuple(assignments),
                job_outcomes=tuple((j, JobStatus.DONE, results[j]) for j in job_ids),
            )
        except (JobFailed, PollTimeout) as exc:
            outcomes = tuple((j, s, fetched.get(j)) for j, s in exc.statuses.items())
            notice = ResultNotice(ok=False, job_outcomes=outcomes, error=str(exc))
        except Exception as exc:
            notice = ResultNotice(ok=False, error=f"{type(exc).__name__}: {exc}")
        notify_results(self.bus, msg.correlation_id, notice, config.sinks, sender=self.name)

    async def close(self) -> None:
        for task in list(self._tasks):
            task.cancel()
        await asyncio.gather(*self._tasks, return_exceptions=True)


class Application(Service):
    """The requesting application: starts workflows and post-processes M8."""

    name = APPLICATION

    def __init__(self, bus: MessageBus, monitor: WorkflowMonitor, data_service: DataService):
        super().__init__(bus, monitor)
        self.data_service = data_service
        self.received: dict[str, list[ResultNotice]] = {}

    def request(self, correlation_id: str, problem: ProblemRequest, config: WorkflowConfig) -> None:
        self.monitor.register(correlation_id, problem, config).state = "running"
        self.send(DECISION, MessageKind.M1_ProblemRequest, correlation_id, (problem, config))

    async def handle(self, msg: Message) -> None:
        wf = self.monitor.get(msg.correlation_id)
        if wf.future.done():
            return
        kind = msg.kind
        if kind is MessageKind.M1r_DecisionNotice:
            self._on_decision(msg, wf)
        elif kind is MessageKind.M2r_DataSet:
            if msg.payload["error"]:
                self.monitor.fail(msg.correlation_id, msg.payload["error"])
                return
            wf.table = msg.payload["table"]
            self.send(CIRCUIT, MessageKind.M3_CircuitGen, msg.correlation_id,
                      (msg.payload["centroids"], msg.payload["points"], wf.profile))
        elif kind is MessageKind.M3r_CircuitBatch:
            shots = wf.config.shots or wf.profile.shots
            self.send(BACKEND, MessageKind.M4_Submit, msg.correlation_id,
                      {"tasks": msg.payload, "config": wf.config, "shots": shots})
        elif kind is MessageKind.M8_ResultNotice:
            notice: ResultNotice = msg.payload
            self.received.setdefault(msg.correlation_id, []).append(notice)
            wf.notice = notice
            if notice.ok:
                wf.assignments = list(notice.assignments)
            self.monitor.sink_done(msg.correlation_id, APPLICATION)

    def _on_decision(self, msg: Message, wf: _Workflow) -> None:
        if msg.payload["error"]:
            self.monitor.fail(msg.correlation_id, msg.payload["error"])
            return
        wf.route, wf.profile = msg.payload["route"], msg.payload["profile"]
        if wf.route is Route.CLASSICAL:
            wf.assignments = self.data_service.classical_exchange(msg.correlation_id, wf.problem, wf.config.sinks)
            self.monitor.finish(msg.correlation_id)
            return
        wf.pending_sinks = {*wf.config.sinks.topics, BACKEND}
        self.send(DATA, MessageKind.M2_DataExtract, msg.correlation_id, (wf.problem.data_path, wf.profile))
