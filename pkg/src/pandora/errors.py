"""Exception hierarchy. Every error carries a stable ``code`` used by the CLI."""

from __future__ import annotations


class PandoraError(Exception):
    code = "PandoraError"

    def __init__(self, detail: str = "", violations: list[tuple[str, str]] | None = None):
        super().__init__(detail)
        self.detail = detail
        self.violations = violations or []

    def to_dict(self) -> dict:
        out = {"error": self.code, "detail": self.detail}
        if self.violations:
            out["violations"] = [{"code": c, "detail": d} for c, d in self.violations]
        return out


class InvalidInstance(PandoraError):
    code = "InvalidInstance"


class NotAForest(InvalidInstance):
    code = "NotAForest"


class BadDistribution(InvalidInstance):
    code = "BadDistribution"


class MissingRootDist(InvalidInstance):
    code = "MissingRootDist"


class UnsortedGrid(InvalidInstance):
    code = "UnsortedGrid"


class BadShapeParams(PandoraError):
    code = "BadShapeParams"


class AtomExplosion(PandoraError):
    code = "AtomExplosion"


class StateSpaceExplosion(PandoraError):
    code = "StateSpaceExplosion"


class PolicyShapeMismatch(PandoraError):
    code = "PolicyShapeMismatch"


class NotIrreducible(PandoraError):
    code = "NotIrreducible"


class NotAperiodic(PandoraError):
    code = "NotAperiodic"


class EnvelopeFailure(PandoraError):
    code = "EnvelopeFailure"


class ZeroTailMass(PandoraError):
    code = "ZeroTailMass"


class NoTopTransition(PandoraError):
    code = "NoTopTransition"


class TooLarge(PandoraError):
    code = "TooLarge"


class BadArgument(PandoraError):
    code = "BadArgument"


# Ordered by precedence when several violations are found at once.
_VIOLATION_CLASSES = {
    cls.code: cls
    for cls in (NotAForest, BadDistribution, MissingRootDist, UnsortedGrid, InvalidInstance)
}


def violation_error(violations: list[tuple[str, str]]) -> InvalidInstance:
    """Build the exception for the first violation, carrying the full list."""
    code, detail = violations[0]
    cls = _VIOLATION_CLASSES.get(code, InvalidInstance)
    return cls(detail, violations)
