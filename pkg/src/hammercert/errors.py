"""Exception hierarchy.

Every error raised by the package derives from :class:`HammerCertError` and
carries the name of the module that produced it, so the CLI can report
provenance without inspecting tracebacks.
"""

from __future__ import annotations


class HammerCertError(Exception):
    module = "hammercert"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def tagged(self, module: str) -> "HammerCertError":
        """Attribute the error to the module that raised it (for shared error types)."""
        self.module = module
        return self

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "module": self.module,
                "message": str(self), **{k: repr(v) for k, v in self.details.items()}}


# quadrature
class QuadratureFailure(HammerCertError):
    module = "quadrature"


# kernel_toolkit
class KernelError(HammerCertError):
    module = "kernel_toolkit"


class NonPositiveC1(KernelError):
    pass


class EnvelopeViolated(KernelError):
    pass


class DegenerateWindow(KernelError):
    pass


# functionals
class FunctionalError(HammerCertError):
    module = "functionals"


class PsiNotInCone(FunctionalError):
    pass


class PsiZero(FunctionalError):
    pass


class NegativeKphi(FunctionalError):
    pass


class MissingNormBound(FunctionalError):
    pass


class FunctionalValidationFailed(FunctionalError):
    pass


# cone_algebra
class ConeAlgebraError(HammerCertError):
    module = "cone_algebra"


class NegativeEntry(ConeAlgebraError):
    pass


class NoConvergence(HammerCertError):
    module = "cone_algebra"

    def __init__(self, message: str, report=None, **details):
        super().__init__(message, **details)
        self.report = report


class SpectralRadiusTooLarge(ConeAlgebraError):
    pass


class NotContractive(ConeAlgebraError):
    pass


# index_conditions / eigencriteria
class InternalInconsistency(HammerCertError):
    module = "index_conditions"


class MissingLimits(HammerCertError):
    module = "eigencriteria"


class NonFinite(HammerCertError):
    module = "eigencriteria"


# hammerstein_solver
class SolverError(HammerCertError):
    module = "hammerstein_solver"

    def __init__(self, message: str, report=None, **details):
        super().__init__(message, **details)
        self.report = report


class Diverged(SolverError):
    pass


class DomainViolation(SolverError):
    pass


# cli_and_config
class ConfigError(HammerCertError):
    module = "cli_and_config"

    def __init__(self, message: str, section: str | None = None,
                 key: str | None = None, line: int | None = None):
        where = []
        if section:
            where.append(f"[{section}]")
        if key:
            where.append(key)
        if line is not None:
            where.append(f"line {line}")
        full = f"{' '.join(where)}: {message}" if where else message
        super().__init__(full, section=section, key=key, line=line)
        self.section, self.key, self.line = section, key, line


class ExpressionError(ConfigError):
    pass
