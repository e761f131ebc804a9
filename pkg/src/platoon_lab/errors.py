"""Exception hierarchy shared by all modules."""


class PlatoonLabError(Exception):
    pass


class InvalidParameterError(PlatoonLabError, ValueError):
    pass


class DesignConstraintError(InvalidParameterError):
    """Gain design violates a positivity constraint (e.g. k3 <= 0)."""


class TopologyError(PlatoonLabError, ValueError):
    """Neighbor data inconsistent with the communication topology."""


class DivergenceError(PlatoonLabError, ArithmeticError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (first bad time t={time:.6f} s)")
        self.time = time


class PoleProximityError(PlatoonLabError, ArithmeticError):
    """Transfer-function denominator vanishes at the requested frequency."""


class SingularPointError(PlatoonLabError, ArithmeticError):
    pass


class NotApplicableError(PlatoonLabError):
    pass
