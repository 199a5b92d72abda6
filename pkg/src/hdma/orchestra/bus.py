"""
In-process asynchronous message bus.

One FIFO topic per service. Delivery is at-least-once: the bus may be told to
redeliver messages (``duplicate_rate``), so handlers must be idempotent by
``msg_id``. Every publish is written to the trace once, whatever the number of
deliveries.
"""
from __future__ import annotations

import asyncio
import logging
import random
from typing import Awaitable, Callable, Iterable

from .messages import Message, TraceLog

logger = logging.getLogger(__name__)

Handler = Callable[[Message], Awaitable[None]]


class MessageBus:
    def __init__(self, trace: TraceLog | None = None, duplicate_rate: float = 0.0, seed: int | None = None):
        if not 0.0 <= duplicate_rate < 1.0:
            raise ValueError("duplicate_rate must be in [0, 1)")
        self.trace = trace if trace is not None else TraceLog()
        self.duplicate_rate = duplicate_rate
        self._rng = random.Random(seed)
        self._queues: dict[str, asyncio.Queue[Message | None]] = {}
        self._tasks: list[asyncio.Task] = []
        self.delivered = 0

    def topic(self, name: str) -> asyncio.Queue:
        if name not in self._queues:
            self._queues[name] = asyncio.Queue()
        return self._queues[name]

    def subscribe(self, name: str, handler: Handler) -> None:
        """Run ``handler`` for every message on topic ``name``, one at a time."""
        queue = self.topic(name)

        async def consume():
            while True:
                msg = await queue.get()
                try:
                    if msg is None:
                        return
                    self.delivered += 1
                    await handler(msg)
                except Exception:
                    logger.exception("handler for %s failed on %s", name, msg.kind if msg else None)
                finally:
                    queue.task_done()

        self._tasks.append(asyncio.get_running_loop().create_task(consume(), name=f"bus:{name}"))

    def publish(self, topics: str | Iterable[str], msg: Message) -> None:
        self.trace.record(msg.sender, msg.kind, msg.correlation_id)
        for name in [topics] if isinstance(topics, str) else topics:
            self._deliver(name, msg)

    def _deliver(self, name: str, msg: Message) -> None:
        queue = self.topic(name)
        queue.put_nowait(msg)
        while self.duplicate_rate and self._rng.random() < self.duplicate_rate:
            queue.put_nowait(msg)

    def redeliver(self, name: str, msg: Message) -> None:
        """Deliver ``msg`` again without tracing it (simulates a broker retry)."""
        self.topic(name).put_nowait(msg)

    async def drain(self) -> None:
        for queue in list(self._queues.values()):
            await queue.join()

    async def close(self) -> None:
        for queue in self._queues.values():
            queue.put_nowait(None)
        await asyncio.gather(*self._tasks, return_exceptions=True)
        self._tasks.clear()
