"""Exception taxonomy shared by all agencid layers.

Rejection of a board that is simply outside a ciphertext's cluster is a
modeled protocol outcome (functions return ``None``), never an exception.
Exceptions are reserved for malformed inputs, tampering, and broken state.
"""


class AgencidError(Exception):
    """Base class for all errors raised by this package."""


class TagMismatchError(AgencidError, ValueError):
    """Group elements with incompatible source-group tags were combined."""


class InvalidCapacityError(AgencidError, ValueError):
    """Requested board capacity is not a positive integer, or the engine cannot host it."""


class InvalidClusterError(AgencidError, ValueError):
    """Cluster index set is empty or contains out-of-range indices."""


class ClusterMismatchError(AgencidError, ValueError):
    """Aggregate key was derived for a different cluster than requested."""


class KeyMismatchError(AgencidError, ValueError):
    """Private key's board index disagrees with the index it is used for."""


class AuthFailureError(AgencidError):
    """Authenticated decryption failed: payload, nonce, tag, or metadata was altered."""


class IntegrityError(AgencidError):
    """A stored artifact (key file, journal entry, container) fails its integrity check."""


class RegistryError(AgencidError):
    """Base class for board/cluster registry failures."""


class DuplicateVendorError(RegistryError):
    """Vendor id already initialized in this registry."""


class DuplicateBoardError(RegistryError):
    """Board id already registered."""


class DuplicateClusterError(RegistryError):
    """Cluster id already formed in this registry."""


class NotFoundError(RegistryError):
    """Unknown vendor, board, cluster, or package."""


class CapacityExhaustedError(RegistryError):
    """No active-or-recyclable board index is available; registration refused."""


class InactiveBoardError(RegistryError):
    """Operation requires an active board with provisioned key material."""


class ScenarioError(RegistryError):
    """Cluster membership violates the requested cluster scenario."""


class PlanError(AgencidError, ValueError):
    """Benchmark experiment plan failed validation."""


class InsufficientDataError(AgencidError):
    """Not enough sweep points or repetitions to fit and assert timing shape."""
