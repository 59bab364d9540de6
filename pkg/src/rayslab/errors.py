"""Exception hierarchy shared by all rayslab modules."""


class RayslabError(Exception):
    """Base class for all rayslab errors."""


class ConfigurationError(RayslabError):
    """Invalid construction parameters or inconsistent configuration."""


class GridMismatchError(RayslabError):
    """A velocity field does not live on the expected grid."""


class DomainError(RayslabError):
    """Function evaluated outside its (t, x) domain of definition."""


class BackendUnsupportedError(RayslabError):
    """Operation not available for the selected collision backend."""


class NotMicroscopicError(RayslabError):
    """Constrained inverse requested for a field with nonzero macroscopic part."""


class MemoryBudgetError(RayslabError):
    """Dense operator assembly would exceed the configured byte budget."""


class CacheIntegrityError(RayslabError):
    """Operator cache file failed its content-hash or header check."""


class CFLViolationError(RayslabError):
    """Requested time step exceeds the advective CFL bound."""


class NumericalAbortError(RayslabError):
    """NaN/Inf guard tripped during time integration."""


class RealizabilityError(RayslabError):
    """Nonpositive density or temperature encountered in moment closure."""


class NegativeInitialDataError(RayslabError):
    """Direct-mode initial distribution is negative somewhere."""


class InsufficientSnapshotsError(RayslabError):
    """Time-derivative norms need at least three stored snapshots."""
