"""Exception hierarchy shared across the toolkit."""


class RetinoscopyError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class OpticsError(RetinoscopyError, ValueError):
    code = "optics_error"


class ZeroPower(OpticsError):
    code = "zero_power"


class Singularity(OpticsError):
    code = "singularity"


class ZeroRatio(OpticsError):
    code = "zero_ratio"


class ImageError(RetinoscopyError, ValueError):
    code = "image_error"


class BadKernel(ImageError):
    code = "bad_kernel"


class Degenerate(ImageError):
    code = "degenerate"


class DegenerateConfig(ImageError):
    code = "degenerate_config"


class SingularHomography(ImageError):
    code = "singular_homography"


class StageError(RetinoscopyError):
    """A pipeline stage could not produce a result for its input."""

    code = "stage_error"


class FrameNotFound(StageError):
    code = "frame_not_found"


class PatternNotFound(StageError):
    code = "pattern_not_found"


class PupilNotFound(StageError):
    code = "pupil_not_found"


class PupilTooSmall(StageError):
    code = "pupil_too_small"


class ReflexNotFound(StageError):
    code = "reflex_not_found"


class NoPasses(StageError):
    code = "no_passes"


class InsufficientTrack(StageError):
    code = "insufficient_track"


class ZeroBeamDisplacement(StageError):
    code = "zero_beam_displacement"


class TooFewValidPasses(StageError):
    code = "too_few_valid_passes"


class ConfigInvalid(RetinoscopyError, ValueError):
    code = "config_invalid"


class ParseError(RetinoscopyError, ValueError):
    code = "parse_error"

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class EmptyInput(RetinoscopyError, ValueError):
    code = "empty_input"


class DegenerateVariance(RetinoscopyError, ValueError):
    code = "degenerate_variance"
