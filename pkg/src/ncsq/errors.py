"""Exception hierarchy shared by all ncsq modules."""


class NcsqError(Exception):
    """Base class for every error raised by ncsq."""


class NumericalError(NcsqError):
    """A numerical procedure failed (CLI exit code 3)."""


class ConfigInvalid(NcsqError, ValueError):
    """A configuration or parameter set is malformed (CLI exit code 2)."""


class NotControllable(ConfigInvalid):
    pass


class NonConvergent(NumericalError):
    pass


class SingularW(NumericalError):
    pass


class SynthesisFailed(NumericalError):
    """The synthesized loop is not stable without dropouts."""


class NotMSS(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class DimensionTooLarge(NumericalError):
    pass


class Reducible(ConfigInvalid):
    pass


class RateOverflow(ConfigInvalid):
    pass


class TooLarge(NcsqError):
    pass


class MalformedBitstring(NcsqError, ValueError):
    pass


class IndexOutOfSection(NcsqError, IndexError):
    pass
