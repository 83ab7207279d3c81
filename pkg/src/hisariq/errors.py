"""Exception types shared across the toolkit."""


class WrongFamilyError(ValueError):
    """A modulator/demapper was invoked with a spec from another family."""


class DegenerateSignalError(ValueError):
    """Signal has zero (or effectively zero) power and cannot be processed."""


class ShapeError(ValueError):
    """Tensor shapes are inconsistent with the layer configuration."""


class ContainerFormatError(ValueError):
    """A dataset container file is malformed; message carries the byte offset."""


class StratificationError(ValueError):
    """A dataset cannot be split with the requested stratified ratios."""


class TrainingDivergedError(RuntimeError):
    """Training produced non-finite losses or gradients."""
