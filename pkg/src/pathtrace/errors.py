"""Exception hierarchy shared by every stage of the pipeline."""


class PathtraceError(Exception):
    """Base class; ``code`` is the machine-readable name emitted by the CLI."""

    code = "PathtraceError"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


def _make(name: str, base=PathtraceError):
    return type(name, (base,), {"code": name})


class CycleDetected(PathtraceError):
    code = "CycleDetected"

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle))


SelfLoop = _make("SelfLoop")
DuplicateEdge = _make("DuplicateEdge")
UnknownNode = _make("UnknownNode")
InvalidGraph = _make("InvalidGraph")

MissingColumn = _make("MissingColumn")
InsufficientData = _make("InsufficientData")
ArityMismatch = _make("ArityMismatch")
MissingNoise = _make("MissingNoise")
NonFiniteInput = _make("NonFiniteInput")
EmptyRowSet = _make("EmptyRowSet")
EmptyInput = _make("EmptyInput")
EmptyVector = _make("EmptyVector", EmptyInput)
MissingScore = _make("MissingScore")
PathTooShort = _make("PathTooShort")
DateNotFound = _make("DateNotFound")

InvalidDateRange = _make("InvalidDateRange")
UnknownKind = _make("UnknownKind")
EmptyDataset = _make("EmptyDataset")
SeriesTooShort = _make("SeriesTooShort")
ConfigError = _make("ConfigError")
