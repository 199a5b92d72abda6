"""Exception hierarchy shared by every hdma module."""


class HDMAError(Exception):
    """Base class for all errors raised by hdma."""


class CircuitError(HDMAError, ValueError):
    """An instruction or circuit violates the circuit model."""


class SimulationError(HDMAError):
    """A circuit cannot be simulated."""


class EncodingError(HDMAError, ValueError):
    """Classical data cannot be encoded under the active constraints."""


class StoreError(HDMAError):
    """The table store rejected a file or an operation."""


class OrchestrationError(HDMAError):
    """A workflow, backend or message handler failed."""
