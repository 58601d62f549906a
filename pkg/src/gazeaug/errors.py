"""Exception types shared across the package."""


class GazeAugError(Exception):
    """Base class for all package errors."""


class ParseError(GazeAugError):
    """Malformed input data; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(GazeAugError):
    """Invalid configuration (unknown key, out-of-range value, bad combination)."""


class RejectionFailure(GazeAugError):
    """The gated augmentation loop exhausted its retry budget.

    Carries the best IOU pair seen across all attempts so callers can
    diagnose saliency/config mismatches.
    """

    def __init__(self, attempts, best_iou_v1, best_iou_v2, threshold):
        self.attempts = attempts
        self.best_iou_v1 = best_iou_v1
        self.best_iou_v2 = best_iou_v2
        self.threshold = threshold
        super().__init__(
            f"no acceptable view pair after {attempts} attempts "
            f"(best IOUs {best_iou_v1:.4f}/{best_iou_v2:.4f}, need > {threshold})"
        )
