"""Wiring of bus, services and monitor, plus the automatic-regeneration watcher."""
from __future__ import annotations

import asyncio
import time
from pathlib import Path
from typing import Awaitable, Callable

from .. import datastore
from .bus import MessageBus
from .messages import TraceLog, new_id
from .services import (
    Application, BackendService, CircuitService, DataService, DecisionService, ProblemRequest,
    ResultManager, WorkflowConfig, WorkflowMonitor, WorkflowResult,
)

__all__ = ["HybridSystem", "run_workflow", "arun_workflow", "RegenerationWatcher"]


class HybridSystem:
    """All services running on one event loop, able to host concurrent workflows.

    Usage::

        async with HybridSystem() as system:
            cid = system.submit(problem, config)
            result = await system.wait(cid)
    """

    def __init__(self, duplicate_rate: float = 0.0, bus_seed: int | None = None, trace: TraceLog | None = None):
        self.bus = MessageBus(trace, duplicate_rate=duplicate_rate, seed=bus_seed)
        self.monitor = WorkflowMonitor(self.bus)
        self.decision = DecisionService(self.bus, self.monitor)
        self.data = DataService(self.bus, self.monitor)
        self.circuit = CircuitService(self.bus, self.monitor)
        self.backend = BackendService(self.bus, self.monitor)
        self.result_manager = ResultManager(self.bus, self.monitor)
        self.application = Application(self.bus, self.monitor, self.data)
        self.services = [self.decision, self.data, self.circuit, self.backend, self.result_manager, self.application]
        self._started = False

    @property
    def trace(self) -> TraceLog:
        return self.bus.trace

    async def start(self) -> None:
        if not self._started:
            for service in self.services:
                service.start()
            self._started = True

    async def stop(self) -> None:
        await self.result_manager.close()
        await self.bus.close()
        self._started = False

    async def __aenter__(self) -> HybridSystem:
        await self.start()
        return self

    async def __aexit__(self, *exc) -> None:
        await self.stop()

    def submit(self, problem: ProblemRequest, config: WorkflowConfig | None = None) -> str:
        correlation_id = new_id()
        self.application.request(correlation_id, problem, config or WorkflowConfig())
        return correlation_id

    async def wait(self, correlation_id: str, timeout: float | None = None) -> WorkflowResult:
        wf = self.monitor.get(correlation_id)
        if timeout is None:
            timeout = wf.config.timeout + 10.0
        return await asyncio.wait_for(asyncio.shield(wf.future), timeout)


async def arun_workflow(
    problem: ProblemRequest, config: WorkflowConfig | None = None, duplicate_rate: float = 0.0,
    bus_seed: int | None = None,
) -> WorkflowResult:
    async with HybridSystem(duplicate_rate=duplicate_rate, bus_seed=bus_seed) as system:
        return await system.wait(system.submit(problem, config))


def run_workflow(
    problem: ProblemRequest, config: WorkflowConfig | None = None, duplicate_rate: float = 0.0,
    bus_seed: int | None = None,
) -> WorkflowResult:
    """Run one workflow to completion on a fresh event loop.

    Raises WorkflowFailed when any stage fails; the data file is then untouched.
    """
    return asyncio.run(arun_workflow(problem, config, duplicate_rate, bus_seed))


class RegenerationWatcher:
    """Detects table changes by comparing content digests on demand."""

    def __init__(self, data_path: str | Path):
        self.data_path = Path(data_path)
        self.token: datastore.ChangeToken | None = None

    def current(self) -> datastore.ChangeToken:
        return datastore.change_token(datastore.load(self.data_path))

    def mark(self) -> None:
        """Accept the current content as seen (call after our own write-backs)."""
        self.token = self.current()

    def changed(self) -> bool:
        token = self.current()
        if token != self.token:
            self.token = token
            return True
        return False

    def watch(
        self,
        on_change: Callable[[], object],
        interval: float = 1.0,
        max_runs: int | None = None,
        max_checks: int | None = None,
        sleep: Callable[[float], object] = time.sleep,
    ) -> int:
        """Call ``on_change`` on the first check and after every detected change.

        Returns the number of runs performed.
        """
        runs = checks = 0
        while (max_runs is None or runs < max_runs) and (max_checks is None or checks < max_checks):
            checks += 1
            if self.changed():
                on_change()
                runs += 1
                self.mark()
            if (max_runs is None or runs < max_runs) and (max_checks is None or checks < max_checks):
                sleep(interval)
        return runs

    async def awatch(
        self, on_change: Callable[[], Awaitable[object]], interval: float = 1.0, max_runs: int | None = None
    ) -> int:
        runs = 0
        while max_runs is None or runs < max_runs:
            if self.changed():
                await on_change()
                runs += 1
                self.mark()
                continue
            await asyncio.sleep(interval)
        return runs
