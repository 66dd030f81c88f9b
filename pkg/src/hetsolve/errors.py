"""Exception hierarchy shared by the solvers, the executor model and file I/O."""


class HetSolveError(Exception):
    """Base class; ``kind`` is the machine-readable name reported by the CLI."""

    kind = "error"


class ConfigError(HetSolveError, ValueError):
    kind = "ConfigError"


class NotSPD(HetSolveError):
    """A Cholesky pivot was not strictly positive."""

    kind = "NotSPD"

    def __init__(self, block_row, pivot, value=float("nan")):
        self.block_row = block_row
        self.pivot = pivot
        self.value = value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot} of diagonal block {block_row} "
            f"is {value!r}"
        )


class SingularBlock(HetSolveError):
    kind = "SingularBlock"

    def __init__(self, index, block_row=None):
        self.index = index
        self.block_row = block_row
        where = f" in diagonal block {block_row}" if block_row is not None else ""
        super().__init__(f"zero or non-finite diagonal entry {index}{where}")


class NumericalError(HetSolveError, ArithmeticError):
    kind = "NumericalError"


class NotConverged(HetSolveError):
    kind = "NotConverged"

    def __init__(self, max_iters):
        self.max_iters = max_iters
        super().__init__(f"CG did not converge within {max_iters} iterations")


class ResidencyError(HetSolveError):
    """A task touched a region that is not resident in its executor's memory space."""

    kind = "ResidencyError"


class FormatError(HetSolveError):
    kind = "FormatError"


class VersionMismatch(FormatError):
    kind = "VersionMismatch"

    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"unsupported BSPD version {found} (expected {expected})")


class TruncatedFile(FormatError):
    kind = "TruncatedFile"

    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f"file truncated: expected {expected} bytes, found {actual}")
