"""Exception hierarchy shared by every energyreg module."""


class EnergyRegError(Exception):
    """Base class for all energyreg errors."""


# configuration
class ConfigError(EnergyRegError):
    pass


class ConfigSyntax(ConfigError):
    """The document could not be parsed."""


class ConfigInvalid(ConfigError):
    """A key holds a value that violates the schema."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# measurement
class BackendUnavailable(EnergyRegError):
    """The energy backend (or stability probe) cannot be used on this host."""


class BackendError(EnergyRegError):
    """A backend read failed for a single task."""


class RepoError(EnergyRegError):
    pass


class EmptyHistory(RepoError):
    pass


class BuildFailed(EnergyRegError):
    def __init__(self, commit_id: str, returncode: int, log_path: str | None = None):
        super().__init__(f"build of {commit_id[:7]} exited with {returncode}")
        self.commit_id = commit_id
        self.returncode = returncode
        self.log_path = log_path


class MadDegenerate(EnergyRegError):
    """Median absolute deviation of the stability baseline is zero."""


# statistics
class StatsError(EnergyRegError):
    pass


class EmptySample(StatsError):
    pass


class SampleTooSmall(StatsError):
    pass


class SampleTooLarge(StatsError):
    pass


class DegenerateSample(StatsError):
    """All values identical; treated as non-normal by callers."""


class SignificantDegenerate(StatsError):
    """Both samples have zero variance but different means.

    The attached ``result`` carries the reported statistic with ``p = 0``.
    """

    def __init__(self, result):
        super().__init__("zero-variance samples with different means")
        self.result = result


class DegeneratePooledSD(StatsError):
    pass


class InvalidBaseline(StatsError):
    pass


class ReportIOError(EnergyRegError):
    pass
