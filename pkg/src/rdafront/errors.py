"""Error hierarchy with stage attribution.

Every failure raised by this package names the stage (module) and, where
useful, the operation that produced it, so the CLI can map failures to
stable exit codes and reports can point at the responsible stage.
"""


class RdaError(Exception):
    """Base class for all package errors."""

    stage = "rdafront"

    def __init__(self, message, operation=None):
        self.operation = operation
        if operation:
            message = f"[{self.stage}.{operation}] {message}"
        else:
            message = f"[{self.stage}] {message}"
        super().__init__(message)


# ---- config / expression ingestion ------------------------------------

class ConfigError(RdaError):
    stage = "config"


class ExprError(RdaError):
    stage = "expr"


class ExprSyntaxError(ExprError):
    """Malformed expression text; carries the byte offset of the failure."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (at offset {offset})", operation="parse")


class UnknownIdentifierError(ExprError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier '{name}' (at offset {offset})",
                         operation="parse")


class UnboundVariableError(ExprError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"variable '{name}' has no binding", operation="eval")


class ExprDomainError(ExprError):
    """Evaluation left the real domain (log of non-positive, 0-division...)."""


# ---- core model ---------------------------------------------------------

class CoreError(RdaError):
    stage = "core"


class OutOfDomainError(CoreError):
    """Sample point outside the z-extent of the box (beyond tolerance)."""


class DegenerateReferenceError(CoreError):
    """Relative error against a zero-norm reference field."""


# ---- characteristics ----------------------------------------------------

class CharacteristicsError(RdaError):
    stage = "characteristics"


class EscapeError(CharacteristicsError):
    """Stop predicate never triggered within the allowed parameter span."""


class BlowUpError(CharacteristicsError):
    """Characteristic state became non-finite."""


class TransversalityError(CharacteristicsError):
    """Initial-manifold Jacobian vanished (or nearly so)."""


class CoverageError(CharacteristicsError):
    """Newton inversion failed on more than the allowed share of nodes."""

    def __init__(self, message, failed_nodes, operation=None):
        self.failed_nodes = failed_nodes
        super().__init__(message, operation=operation)


class DegenerateCharacteristicError(CharacteristicsError):
    """A characteristic's z-speed crossed zero (turning path)."""


# ---- outer expansion ----------------------------------------------------

class OuterError(RdaError):
    stage = "outer"


class DivisionHazardError(OuterError):
    """|phi| fell below the safe threshold along a characteristic."""


class ConditionViolatedError(OuterError):
    """A structural assumption failed on sampled data (sign/Lipschitz)."""


# ---- front dynamics -----------------------------------------------------

class FrontError(RdaError):
    stage = "front"


class FrontEscapeError(FrontError):
    def __init__(self, message, time, operation=None):
        self.time = time
        super().__init__(f"{message} (t = {time:.6g})", operation=operation)


class MultivaluedFrontError(FrontError):
    """Fan folding: a target acquired multiple characteristic preimages."""


# ---- inner layer --------------------------------------------------------

class LayerError(RdaError):
    stage = "layer"


class ProjectionError(LayerError):
    """Closest-point Newton iteration failed to converge."""


class LayerExistenceError(LayerError):
    """Transition-profile existence inequality violated."""


class LayerAssemblyError(LayerError):
    """Improper layer integral failed to converge."""


# ---- assembler / reference solver / io ----------------------------------

class AssembleError(RdaError):
    stage = "assemble"


class ReferenceSolverError(RdaError):
    stage = "reference"


class DivergenceError(ReferenceSolverError):
    def __init__(self, message, step_index, operation=None):
        self.step_index = step_index
        super().__init__(f"{message} (step {step_index})", operation=operation)


class FieldIOError(RdaError):
    stage = "io"


class PipelineError(RdaError):
    stage = "pipeline"
