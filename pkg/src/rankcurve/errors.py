"""Exception hierarchy shared by all rankcurve modules."""


class RankCurveError(Exception):
    """Base class for every error raised by rankcurve."""


class DimensionMismatch(RankCurveError, ValueError):
    pass


class PolyParseError(RankCurveError, ValueError):
    """Syntax error in a polynomial source; carries 1-based line/column."""

    def __init__(self, message, line=1, column=1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class SingularMatrix(RankCurveError, ArithmeticError):
    pass


class NotSymmetric(RankCurveError, ValueError):
    pass


class NoConvergence(RankCurveError, ArithmeticError):
    def __init__(self, message, iterations=None):
        self.iterations = iterations
        super().__init__(message)


class DivergedToInfinity(RankCurveError, ArithmeticError):
    pass


class InvalidStart(RankCurveError, ValueError):
    pass


class DirectionAmbiguous(RankCurveError, ArithmeticError):
    """Two eigenvalues of the stability matrix compete for the tangent."""

    def __init__(self, message, eigenvalues=None):
        self.eigenvalues = eigenvalues
        super().__init__(message)


class ConfigError(RankCurveError, ValueError):
    pass
