"""Error types raised by the pq-osc services.

Every domain failure derives from ``PqOscError`` so the CLI and the API can
turn it into a single error record without catching unrelated exceptions.
"""
from typing import Optional


class PqOscError(Exception):
    """Base class for all pq-osc domain errors"""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    @property
    def kind(self) -> str:
        return type(self).__name__


class NonFiniteResult(PqOscError):
    def __init__(self, n: int, what: str = "pq-number"):
        super().__init__(f"{what} overflowed to a non-finite value at n={n}")
        self.n = n


class ZeroBaseNegativePower(PqOscError):
    def __init__(self, n: int):
        super().__init__(f"negative power {n} of a zero base (p*q = 0)")
        self.n = n


class DivisionByZeroPqNumber(PqOscError):
    def __init__(self, m: int):
        super().__init__(f"[{m}]_(p,q) vanishes and is required as a divisor")
        self.m = m


class SeriesDiverged(PqOscError):
    def __init__(self, terms_used: int, last_term: float):
        super().__init__(
            f"series terms grow without bound (terms={terms_used}, |last term|={last_term:.3e})"
        )
        self.terms_used = terms_used
        self.last_term = last_term


class DenominatorUnderflow(PqOscError):
    def __init__(self, magnitude: float, floor: float):
        super().__init__(f"|e^z_(p,q)| = {magnitude:.3e} is below the floor {floor:.1e}")
        self.magnitude = magnitude


class NegativePqNumber(PqOscError):
    def __init__(self, n: int, value: float):
        super().__init__(f"[{n}]_(p,q) = {value:.6g} < 0, Fock representation is not real")
        self.n = n
        self.value = value


class TailTooLarge(PqOscError):
    def __init__(self, tail: float, dim: int, tol: float):
        super().__init__(f"tail mass {tail:.3e} beyond dim={dim} exceeds {tol:.1e}; increase dim")
        self.tail = tail
        self.dim = dim


class SelfCheckFailed(PqOscError):
    def __init__(self, what: str, gap: float, tol: float):
        super().__init__(f"self-check '{what}' failed: gap {gap:.3e} > {tol:.1e}")
        self.what = what
        self.gap = gap


class ZeroDeformationParameter(PqOscError):
    def __init__(self, name: str):
        super().__init__(f"deformation parameter {name} must be nonzero here")
        self.name = name


class IndexOutOfRange(PqOscError):
    def __init__(self, n: int, dim: int):
        super().__init__(f"level {n} is not representable at dim={dim}")
        self.n = n
        self.dim = dim


class NotNormalized(PqOscError):
    def __init__(self, norm_sq: float):
        super().__init__(f"state norm^2 = {norm_sq:.15g} is not 1")
        self.norm_sq = norm_sq


class ConfigInvalid(PqOscError):
    def __init__(self, field: str, reason: Optional[str] = None):
        super().__init__(f"invalid value for '{field}'" + (f": {reason}" if reason else ""))
        self.field = field
