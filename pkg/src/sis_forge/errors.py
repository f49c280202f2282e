"""Exception types shared across the package."""


class SisError(Exception):
    """Base class for every error raised by sis_forge."""


class ShapeError(SisError, ValueError):
    def __init__(self, what, *shapes):
        self.shapes = shapes
        desc = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{what}: incompatible shapes {desc}")


class ConvergenceError(SisError, ArithmeticError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class GeometryError(SisError, ValueError):
    pass


class ConfigError(SisError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class DivergenceError(SisError, FloatingPointError):
    def __init__(self, epoch, value):
        self.epoch = epoch
        self.value = value
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}")
