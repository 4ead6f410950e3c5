"""Exception hierarchy shared by all modules."""


class CollabEnsembleError(Exception):
    """Base class for every error raised by this package."""


class InputError(CollabEnsembleError, ValueError):
    """Malformed or inconsistent caller input."""


class StateError(CollabEnsembleError, RuntimeError):
    """Operation not valid for the current object state (e.g. empty ensemble)."""


class SingleClassError(InputError):
    """Training data holds only one rating class, so no SVM can be fitted."""


class StoreFormatError(InputError):
    """A stored file is corrupt, has a bad checksum or an unknown version."""


class StoreVersionError(StoreFormatError):
    """A stored file was written by an unsupported format version."""


class EmptyVectorWarning(UserWarning):
    """A text produced no in-vocabulary terms and mapped to the zero vector."""


class ConvergenceWarning(UserWarning):
    """The SVM solver stopped at its iteration cap before meeting KKT tolerance."""
