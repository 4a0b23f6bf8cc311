"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems exit 1, numerical
failures exit 2, I/O problems exit 3.
"""

from __future__ import annotations


class LuxsimError(Exception):
    """Base class for all package errors."""


class FormatError(LuxsimError):
    """Malformed input file (OBJ, CSV curve, PGM, config JSON)."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}: "
        if line is not None:
            loc += f"line {line}: "
        super().__init__(f"{loc}{message}")


class GeometryError(LuxsimError):
    """Degenerate or empty geometry."""


class ValidationError(LuxsimError):
    """One or more scene/config validation failures, all collected."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__(
            "scene validation failed:\n" + "\n".join(f"  - {v}" for v in self.violations)
        )


class NumericalError(LuxsimError):
    """Solver failure (non-convergence, singular system)."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)


class DegenerateEmitterError(NumericalError):
    """All emission weights of a source patch are zero (pathological LDC)."""

    def __init__(self, patch_id: int):
        self.patch_id = patch_id
        super().__init__(f"patch {patch_id}: emission-curve weights sum to zero")
