"""Error types. Each carries a stable ``code`` string used by the CLI and logs."""


class TerrainSynthError(Exception):
    code = "ERROR"

    def __init__(self, message="", **info):
        super().__init__(message or self.code)
        self.info = info


class DegeneratePolygonError(TerrainSynthError, ValueError):
    code = "DEGENERATE_POLYGON"


class OutOfGridError(TerrainSynthError, ValueError):
    code = "OUT_OF_GRID"


class CodeRangeError(TerrainSynthError, ValueError):
    code = "CODE_RANGE"


class OverlapError(TerrainSynthError, ValueError):
    code = "OVERLAP"


class SpecNotReducedError(TerrainSynthError, ValueError):
    code = "SPEC_NOT_REDUCED"


class NotRealizableError(TerrainSynthError):
    code = "NOT_REALIZABLE"


class UnrepairableError(TerrainSynthError):
    code = "UNREPAIRABLE"


class DimensionMismatchError(TerrainSynthError, ValueError):
    code = "DIMENSION_MISMATCH"


class EmptyPolygonsError(TerrainSynthError, ValueError):
    code = "EMPTY_POLYGONS"


class NumericalFailure(TerrainSynthError, ArithmeticError):
    code = "NUMERICAL_FAILURE"


class NoCandidateError(TerrainSynthError):
    code = "NO_CANDIDATE"


class ConfigError(TerrainSynthError):
    code = "CONFIG_ERROR"
