"""Exception types raised across the package.

Each exception carries a short ``code`` string so callers (and the JSON
reports) can branch on the failure kind without string matching.
"""


class ElectionLabError(Exception):
    code = "error"


class InvalidSize(ElectionLabError, ValueError):
    code = "invalid-size"


class InvalidIds(ElectionLabError, ValueError):
    code = "invalid-ids"


class NotConnected(ElectionLabError, ValueError):
    code = "not-connected"


class NoSuchNode(ElectionLabError, KeyError):
    code = "no-such-node"


class TopologyViolation(ElectionLabError, RuntimeError):
    code = "topology-violation"


class InvalidDimension(ElectionLabError, ValueError):
    code = "invalid-dimension"


class InvalidParties(ElectionLabError, ValueError):
    code = "invalid-parties"


class AlreadyMeasured(ElectionLabError, RuntimeError):
    code = "already-measured"


class NoSuchShare(ElectionLabError, KeyError):
    code = "no-such-share"


class TopologyMismatch(ElectionLabError, ValueError):
    code = "topology-mismatch"


class ModelMismatch(ElectionLabError, ValueError):
    code = "model-mismatch"


class UnsoundTimeout(ElectionLabError, ValueError):
    code = "unsound-timeout"


class BootstrapFailed(ElectionLabError, RuntimeError):
    code = "bootstrap-failed"


class ConfigError(ElectionLabError, ValueError):
    """Scenario rejected; ``pointer`` is a JSON pointer to the bad key."""

    code = "config-error"

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.message = message
