class StrError(Exception):
    """Base class for every error the package raises on purpose."""


class ShapeError(StrError, ValueError):
    def __init__(self, op: str, *shapes, detail: str = ""):
        self.op = op
        self.shapes = shapes
        shown = " vs ".join(str(tuple(s)) for s in shapes)
        message = f"{op}: incompatible shapes {shown}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class ConfigError(StrError):
    pass


class FormatError(StrError):
    def __init__(self, what: str, *, expected=None, found=None):
        self.expected = expected
        self.found = found
        message = what
        if expected is not None or found is not None:
            message += f": expected {expected!r}, found {found!r}"
        super().__init__(message)


class FlatlandError(StrError):
    pass


class TrainingDiverged(StrError):
    def __init__(self, step: int, value: float):
        self.step = step
        self.value = value
        super().__init__(f"Loss became {value} at step {step}, aborting.")


class ExperimentError(StrError):
    pass
