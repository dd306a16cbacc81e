# app/core/errors.py
"""
Domain exceptions.

Two families: `InputError` (bad geometry, config or precondition, exit code 1)
and `NumericalError` (solver failures, exit code 2). Both derive from builtin
exception types so callers catching ValueError / ArithmeticError keep working.
"""


class XtalkError(Exception):
    """Base class for every error raised by the analysis services."""


# ---------- Input errors (exit 1) ----------

class InputError(XtalkError, ValueError):
    pass


class NoCouplingError(InputError):
    def __init__(self, message: str = "no coupling: lc_len must be > 0"):
        super().__init__(message)


class AsymmetricResistanceError(InputError):
    def __init__(self, dr: float):
        super().__init__(
            f"asymmetric resistance unsupported (dr={dr}): "
            "decoupling requires equal line resistances (dr = 0)"
        )
        self.dr = dr


class ThresholdAbovePeakError(InputError):
    def __init__(self, vt: float, vmax: float):
        super().__init__(f"threshold above peak: vt={vt:.6g} >= vmax={vmax:.6g}, width undefined")
        self.vt = vt
        self.vmax = vmax


class TwaNotApplicableError(InputError):
    def __init__(self, mode: str, zeta: float, limit: float):
        super().__init__(
            f"twa rejected for {mode} mode: zeta={zeta:.4g} > {limit:g} (overdamped, "
            "use the ladder method)"
        )
        self.mode = mode
        self.zeta = zeta


class ConfigError(InputError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class ReportWriteError(InputError):
    def __init__(self, path: str, cause: Exception):
        super().__init__(f"cannot write {path}: {cause}")
        self.path = path
        self.cause = cause


# ---------- Numerical errors (exit 2) ----------

class NumericalError(XtalkError, ArithmeticError):
    pass


class SingularSystemError(NumericalError):
    def __init__(self, node: str):
        super().__init__(f"singular MNA: node '{node}' is floating (no capacitance, no resistive path)")
        self.node = node


class IntegrationDivergedError(NumericalError):
    def __init__(self, step: int, t: float):
        super().__init__(f"integration diverged at step {step} (t={t:.6g} s)")
        self.step = step
        self.t = t
