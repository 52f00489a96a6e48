"""
Exceptions - Error hierarchy for the whole package

Every error carries a human readable `detail` and an optional `context`
dict (seed, step, shapes...) so the CLI can report it without a traceback.

=== EXIT CODES (see activeil.main) ===
- ConfigError          -> 1
- everything else      -> 2
"""
from typing import Any, Dict, Optional


class ActiveILError(Exception):
    """Base error of the package"""

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context: Dict[str, Any] = dict(context or {})

    def __str__(self) -> str:
        if not self.context:
            return self.detail
        ctx = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.detail} ({ctx})"


class ShapeError(ActiveILError, ValueError):
    """Array dimensions do not match what a model or function expects"""


class TrainingDivergenceError(ActiveILError, ArithmeticError):
    """A loss, gradient or TD target became non-finite"""


class InvalidActionError(ActiveILError, ValueError):
    """Action index outside the environment's action set"""


class OracleError(ActiveILError):
    """The simulated expert cannot answer for the given observation"""


class ConfigError(ActiveILError, ValueError):
    """Invalid experiment configuration"""

    def __init__(self, detail: str, keys: Optional[list] = None):
        super().__init__(detail, {"keys": ", ".join(keys)} if keys else None)
        self.keys = list(keys or [])


class ComparisonError(ActiveILError, ValueError):
    """Result sets cannot be compared (different seeds, budgets or environments)"""


class RunError(ActiveILError):
    """Failure inside a training run, with run context attached"""

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None, cause: Optional[BaseException] = None):
        super().__init__(detail, context)
        self.cause = cause
