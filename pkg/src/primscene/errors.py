"""Exception types shared across the pipeline."""


class PrimsceneError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateDirectionError(PrimsceneError, ValueError):
    """Look-at direction is undefined (eye == target or up parallel to forward)."""


class DimensionMismatchError(PrimsceneError, ValueError):
    """Image or grid dimensions do not agree."""


class InvalidClipRangeError(PrimsceneError, ValueError):
    """Raised when near/far clip planes are not ordered 0 < near < far."""


class DatasetError(PrimsceneError):
    """Base class for dataset load/save/mutation failures."""


class DatasetParseError(DatasetError, ValueError):
    """transforms.json is malformed; message names the offending field."""


class MissingImagesError(DatasetError):
    """One or more frame image files are absent."""

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__(f"{len(self.missing)} image file(s) missing: {self.missing[:5]}")


class NonOrthonormalRotationError(DatasetError, ValueError):
    """A frame rotation is not a proper rotation (reflection or heavy drift)."""


class DatasetIOError(DatasetError, OSError):
    """Filesystem failure while reading or writing a dataset, with path context."""


class GridLayoutError(PrimsceneError, ValueError):
    """Reference grid tile count or tile dimensions are inconsistent."""


class BackendError(PrimsceneError):
    """Base class for neural-backend failures."""


class BackendUnreachableError(BackendError):
    """Backend did not answer within the retry policy."""


class BackendRequestError(BackendError, ValueError):
    """Request rejected before dispatch (empty prompt, empty image, ...)."""


class ContractViolationError(BackendError):
    """Backend response failed re-validation (wrong dimensions, invalid mesh, ...)."""


class DegeneratePrimitiveError(PrimsceneError, ValueError):
    """Primitive has a zero-volume bounding box; nothing can be placed in it."""


class PipelineError(PrimsceneError):
    """Object insertion failed; partial progress is recorded in the job state."""
