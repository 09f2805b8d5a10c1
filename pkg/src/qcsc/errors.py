"""Exception hierarchy.

Every error carries a ``kind`` (the diagnostic name used in reports and
scheduler logs) that defaults to the class name.
"""
from __future__ import annotations


class QcscError(Exception):
    kind: str = "QcscError"

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.kind = cls.__name__


# topology
class TopologyError(QcscError):
    pass


class DuplicateId(TopologyError):
    pass


class DanglingLink(TopologyError):
    pass


class IsolatedQpu(TopologyError):
    pass


class NoPath(QcscError):
    pass


# kernel
class TimestampInPast(QcscError):
    pass


class HandlerFailure(QcscError):
    def __init__(self, handler_id: str, event, cause: BaseException):
        super().__init__(f"handler {handler_id!r} failed on {event}: {cause!r}")
        self.handler_id = handler_id
        self.event = event
        self.cause = cause


# device
class DeviceError(QcscError):
    pass


class ModelTooLarge(DeviceError):
    pass


class InvalidTheta(DeviceError):
    pass


class InvalidDistance(DeviceError):
    pass


class InvalidCircuit(DeviceError):
    pass


class UnknownJob(QcscError):
    pass


class NotDone(QcscError):
    pass


class NotCancellable(QcscError):
    pass


# qrmi
class ResourceHeld(QcscError):
    pass


class ResourceInaccessible(QcscError):
    pass


class UnknownResource(QcscError):
    pass


class UnknownToken(QcscError):
    pass


class AlreadyReleased(QcscError):
    pass


class TokenExpired(QcscError):
    pass


class DeviceRejected(QcscError):
    def __init__(self, cause: DeviceError):
        super().__init__(f"device rejected job: {cause.kind}: {cause}")
        self.cause = cause


# scheduler
class InvalidSpec(QcscError):
    pass


class UnsatisfiableDemand(QcscError):
    pass


class CouplingInfeasible(QcscError):
    pass


class ResidencyViolation(QcscError):
    pass


# tcg
class PlacementInfeasible(QcscError):
    def __init__(self, message: str, edge=None):
        super().__init__(message)
        self.edge = edge


class NodeFailure(QcscError):
    def __init__(self, node_id: str, cause: BaseException):
        super().__init__(f"node {node_id!r} failed: {cause!r}")
        self.node_id = node_id
        self.cause = cause


class GraphInvalid(QcscError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


# workloads
class EmptySubspace(QcscError):
    pass


class SingularMatrix(QcscError):
    pass


class AllocationExpired(QcscError):
    pass


# telemetry
class CounterRegression(QcscError):
    pass


class InvalidName(QcscError):
    pass


class EmptyWindow(QcscError):
    pass


# scenarios
class ParseError(QcscError):
    pass


class ValidationError(QcscError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)


class RuntimeFailure(QcscError):
    pass
