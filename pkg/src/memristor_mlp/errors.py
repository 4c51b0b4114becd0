"""Exception hierarchy shared by all modules."""


class MemristorMLPError(Exception):
    """Base class for every error raised by this package."""


class InvalidProfile(MemristorMLPError, ValueError):
    pass


class InvalidCurve(MemristorMLPError, ValueError):
    pass


class TargetOutOfRange(MemristorMLPError, ValueError):
    """Requested resistance lies outside the device window [r_lrs, r_hrs]."""


class UnsafeInputVoltage(MemristorMLPError, ValueError):
    """An input voltage exceeds the non-disturbing read range (+-1 V)."""


class DimensionMismatch(MemristorMLPError, ValueError):
    pass


class BudgetExceeded(MemristorMLPError, ValueError):
    """Topology needs more complementary pairs than the array provides."""


class WeightOutOfRange(MemristorMLPError, ValueError):
    """Weight magnitude exceeds what a complementary pair can realize."""


class NonFiniteLoss(MemristorMLPError, ArithmeticError):
    """Training loss became NaN or infinite (usually a mis-scaled step size)."""


class ConfigError(MemristorMLPError, ValueError):
    pass
