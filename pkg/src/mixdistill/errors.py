"""Exception types shared across the toolkit."""


class MixdistillError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(MixdistillError):
    """A source file does not match its dataset's published schema."""


class UnknownSplit(MixdistillError):
    """Requested split does not exist for the dataset."""


class MissingKey(MixdistillError):
    """A problem lacks the stratification key."""


class ModeMismatch(MixdistillError):
    """Template and problem belong to different dataset families."""


class EndpointUnreachable(MixdistillError):
    """Endpoint failed after all retries."""


class AuthError(MixdistillError):
    """Endpoint rejected credentials."""


class BudgetExceeded(MixdistillError):
    """Configured request budget was hit."""


class SandboxSetupError(MixdistillError):
    """The program runner subprocess could not be started."""


class EmptyCorpus(MixdistillError):
    """No accepted paths available for the requested build mode."""


class InsufficientPaths(MixdistillError):
    """Stored bundles do not carry enough paths for the requested sweep."""


class MissingGold(MixdistillError):
    """A prediction references a problem absent from the gold set."""


class IncompleteRun(MixdistillError):
    """A run directory is missing required artifacts.

    `missing` lists every expected-but-absent file.
    """

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__("incomplete run, missing: " + ", ".join(self.missing))


class ConfigError(MixdistillError):
    """Run configuration is invalid."""


class StageDependencyMissing(MixdistillError):
    """A pipeline stage was invoked before the stage it depends on."""

    def __init__(self, stage: str, needs: str):
        self.stage = stage
        self.needs = needs
        super().__init__(f"stage '{stage}' requires outputs of stage '{needs}'")
