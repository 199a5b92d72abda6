"""Services, message bus and backends that carry a problem from the database to a quantum backend and back."""
from .backends import (
    BackendAdapter, HttpBackend, JobRecord, JobState, JobStatus, LocalSimulatorBackend, MockRemoteBackend,
    derive_seed,
)
from .bus import MessageBus
from .messages import CLASSICAL_SEQUENCE, QUANTUM_SEQUENCE, Message, MessageKind, TraceLog
from .services import (
    BackendUnavailable, JobFailed, PollTimeout, ProblemRequest, Route, Sinks, SinkUnavailable, UnknownProblemKind,
    WorkflowConfig, WorkflowFailed, WorkflowResult, decide, notify_results, poll_collect, submit_batch,
)
from .workflow import HybridSystem, RegenerationWatcher, arun_workflow, run_workflow

__all__ = [
    "BackendAdapter", "HttpBackend", "JobRecord", "JobState", "JobStatus", "LocalSimulatorBackend",
    "MockRemoteBackend", "derive_seed", "MessageBus", "CLASSICAL_SEQUENCE", "QUANTUM_SEQUENCE", "Message",
    "MessageKind", "TraceLog", "BackendUnavailable", "JobFailed", "PollTimeout", "ProblemRequest", "Route", "Sinks",
    "SinkUnavailable", "UnknownProblemKind", "WorkflowConfig", "WorkflowFailed", "WorkflowResult", "decide",
    "notify_results", "poll_collect", "submit_batch", "HybridSystem", "RegenerationWatcher", "arun_workflow",
    "run_workflow",
]
