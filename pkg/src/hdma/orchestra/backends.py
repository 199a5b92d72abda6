"""
Quantum backends behind one submit / status / result contract.

``LocalSimulatorBackend`` runs circuits synchronously on the embedded
simulator. ``MockRemoteBackend`` imitates a cloud service: jobs sit in a queue
for a configurable number of status polls and can be told to fail, stall or
reject submissions. ``HttpBackend`` talks to anything exposing the same
contract over HTTP (see :mod:`hdma.orchestra.http`).
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol, runtime_checkable

import httpx
import numpy as np

from .. import qcir
from ..errors import OrchestrationError
from ..qsim import CountsMap, sample_counts

__all__ = [
    "JobStatus", "JobState", "JobRecord", "BackendAdapter", "BackendError", "SubmissionRejected",
    "ResultNotReady", "UnknownJob", "InvalidTransition",
    "LocalSimulatorBackend", "MockRemoteBackend", "HttpBackend", "derive_seed",
]


class BackendError(OrchestrationError):
    pass


class SubmissionRejected(BackendError):
    pass


class ResultNotReady(BackendError):
    pass


class UnknownJob(BackendError, KeyError):
    pass


class InvalidTransition(OrchestrationError):
    pass


class JobStatus(str, Enum):
    """Status as reported by a backend."""
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"

    @property
    def terminal(self) -> bool:
        return self in (JobStatus.DONE, JobStatus.FAILED)


class JobState(str, Enum):
    """Lifecycle of a job as tracked by the Backend Service."""
    CREATED = "CREATED"
    SUBMITTED = "SUBMITTED"
    RUNNING = "RUNNING"
    DONE = "DONE"
    FAILED = "FAILED"


_NEXT = {
    JobState.CREATED: (JobState.SUBMITTED,),
    JobState.SUBMITTED: (JobState.RUNNING,),
    JobState.RUNNING: (JobState.DONE, JobState.FAILED),
    JobState.DONE: (),
    JobState.FAILED: (),
}


@dataclass
class JobRecord:
    circuit_text: str
    job_id: str | None = None
    state: JobState = JobState.CREATED
    counts: CountsMap | None = None
    attempts: int = 0
    error: str | None = None
    history: list[JobState] = field(default_factory=lambda: [JobState.CREATED])

    def advance(self, target: JobState, counts: CountsMap | None = None) -> None:
        """Move to ``target``, passing through RUNNING when a backend skipped it."""
        if target == self.state:
            return
        path = []
        state = self.state
        while state != target:
            nxt = _NEXT[state]
            if not nxt:
                raise InvalidTransition(f"job {self.job_id}: {self.state.value} -> {target.value}")
            state = target if target in nxt else nxt[0]
            path.append(state)
        if target == JobState.DONE and counts is None:
            raise InvalidTransition(f"job {self.job_id}: DONE requires counts")
        if target != JobState.DONE and counts is not None:
            raise InvalidTransition(f"job {self.job_id}: counts only accompany DONE")
        self.history.extend(path)
        self.state = target
        self.counts = counts


@runtime_checkable
class BackendAdapter(Protocol):
    def submit_job(self, circuit_text: str, shots: int, seed: int | None) -> str: ...

    def job_status(self, job_id: str) -> JobStatus: ...

    def job_result(self, job_id: str) -> CountsMap: ...


def derive_seed(base: int, *keys: int) -> int:
    """Independent per-circuit seed from a workflow seed and integer keys."""
    entropy = [int(base) % 2**64, *(int(k) % 2**64 for k in keys)]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


@dataclass
class _Job:
    circuit: qcir.QuantumCircuit
    shots: int
    seed: int | None
    polls: int = 0
    status: JobStatus = JobStatus.QUEUED
    counts: CountsMap | None = None


class LocalSimulatorBackend:
    """Runs each circuit at submit time; every job is done on its first poll."""

    def __init__(self):
        self._jobs: dict[str, _Job] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self.result_fetches: dict[str, int] = {}

    def submit_job(self, circuit_text: str, shots: int = 1000, seed: int | None = None) -> str:
        try:
            circuit = qcir.parse(circuit_text)
        except qcir.CircuitError as exc:
            raise SubmissionRejected(f"invalid circuit: {exc}") from None
        job = _Job(circuit, shots, seed)
        job.counts = sample_counts(circuit, shots, seed)
        job.status = JobStatus.DONE
        with self._lock:
            job_id = f"local-{next(self._ids)}"
            self._jobs[job_id] = job
        return job_id

    def _job(self, job_id: str) -> _Job:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise UnknownJob(job_id) from None

    def job_status(self, job_id: str) -> JobStatus:
        return self._job(job_id).status

    def job_result(self, job_id: str) -> CountsMap:
        job = self._job(job_id)
        if job.status is not JobStatus.DONE:
            raise ResultNotReady(f"job {job_id} is {job.status.value}")
        with self._lock:
            self.result_fetches[job_id] = self.result_fetches.get(job_id, 0) + 1
        return job.counts


class MockRemoteBackend:
    """Cloud-service stand-in with queueing latency and injectable faults.

    A job reports ``queued`` for ``latency_polls - 1`` status calls, then
    ``running`` once, and is executed on the poll that completes it. Results
    are identical to :func:`hdma.qsim.sample_counts` for the same circuit,
    shots and seed.
    """

    def __init__(
        self,
        latency_polls: int = 3,
        fail_all: bool = False,
        stuck: bool = False,
        reject_submissions: frozenset[int] | set[int] = frozenset(),
        transient_rejections: int = 0,
    ):
        self.latency_polls = max(1, latency_polls)
        self.fail_all = fail_all
        self.stuck = stuck
        self.reject_submissions = frozenset(reject_submissions)  # 1-based circuit ordinal, rejected forever
        self.transient_rejections = transient_rejections  # first N submit calls fail
        self._jobs: dict[str, _Job] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._seen_texts: dict[str, int] = {}
        self.submit_calls = 0
        self.status_calls = 0
        self.result_fetches: dict[str, int] = {}

    def submit_job(self, circuit_text: str, shots: int = 1000, seed: int | None = None) -> str:
        with self._lock:
            self.submit_calls += 1
            ordinal = self._seen_texts.setdefault(circuit_text, len(self._seen_texts) + 1)
            if self.transient_rejections > 0:
                self.transient_rejections -= 1
                raise SubmissionRejected("service temporarily unavailable")
            if ordinal in self.reject_submissions:
                raise SubmissionRejected(f"circuit #{ordinal} rejected")
        try:
            circuit = qcir.parse(circuit_text)
        except qcir.CircuitError as exc:
            raise SubmissionRejected(f"invalid circuit: {exc}") from None
        with self._lock:
            job_id = f"remote-{next(self._ids)}"
            self._jobs[job_id] = _Job(circuit, shots, seed)
        return job_id

    def _job(self, job_id: str) -> _Job:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise UnknownJob(job_id) from None

    def job_status(self, job_id: str) -> JobStatus:
        with self._lock:
            self.status_calls += 1
            job = self._job(job_id)
            if job.status.terminal or self.stuck:
                return job.status
            job.polls += 1
            if job.polls >= self.latency_polls:
                if self.fail_all:
                    job.status = JobStatus.FAILED
                else:
                    job.counts = sample_counts(job.circuit, job.shots, job.seed)
                    job.status = JobStatus.DONE
            elif job.polls == self.latency_polls - 1:
                job.status = JobStatus.RUNNING
            return job.status

    def job_result(self, job_id: str) -> CountsMap:
        with self._lock:
            job = self._job(job_id)
            if job.status is not JobStatus.DONE:
                raise ResultNotReady(f"job {job_id} is {job.status.value}")
            self.result_fetches[job_id] = self.result_fetches.get(job_id, 0) + 1
            return job.counts


class HttpBackend:
    """BackendAdapter over the HTTP job surface (``POST /jobs`` and friends)."""

    def __init__(self, client: httpx.Client):
        self.client = client

    def _check(self, response: httpx.Response, job_id: str | None = None) -> httpx.Response:
        if response.status_code == 404 and job_id is not None:
            raise UnknownJob(job_id)
        if response.status_code == 409:
            raise ResultNotReady(response.text)
        if response.status_code in (400, 422, 503):
            raise SubmissionRejected(response.text)
        response.raise_for_status()
        return response

    def submit_job(self, circuit_text: str, shots: int = 1000, seed: int | None = None) -> str:
        params = {"shots": shots} | ({"seed": seed} if seed is not None else {})
        try:
            r = self.client.post("/jobs", content=circuit_text.encode("utf-8"), params=params,
                                 headers={"content-type": "text/plain"})
        except httpx.TransportError as exc:
            raise SubmissionRejected(f"transport error: {exc}") from None
        return self._check(r).text.strip()

    def job_status(self, job_id: str) -> JobStatus:
        return JobStatus(self._check(self.client.get(f"/jobs/{job_id}/status"), job_id).text.strip())

    def job_result(self, job_id: str) -> CountsMap:
        return CountsMap.from_text(self._check(self.client.get(f"/jobs/{job_id}/result"), job_id).text)
