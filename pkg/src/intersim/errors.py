"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class InvalidConfig(SimError):
    pass


class ConfigParseError(SimError):
    pass


class EnumerationBudgetExceeded(SimError):
    pass


class DegenerateTrajectory(SimError):
    pass


class InvalidK(SimError):
    pass


class NonFiniteGradient(SimError):
    pass


class DemoFormatError(SimError):
    pass


class EmptyLog(SimError):
    pass


class NoSolution(SimError):
    """Planner found no collision-free trajectory even after enlargement."""

    def __init__(self, message="no solution", vehicle_id=None):
        super().__init__(message)
        self.vehicle_id = vehicle_id


class AllAllocationsInfeasible(SimError):
    """Every reasoning-depth allocation scored -inf; reported as deadlock."""


class CollisionDetected(SimError):
    """Two vehicle footprints overlapped; the run is aborted."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class DeadlockDetected(SimError):
    """All in-network vehicles stationary for a sustained window."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log
