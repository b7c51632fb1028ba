"""Exception types shared across the package."""


class CorrsimError(Exception):
    """Base class for all package errors."""


class DegenerateRotation(CorrsimError):
    """6-D rotation vector cannot be orthonormalized."""


class ShapeMismatch(CorrsimError):
    """Tensor shapes are inconsistent with the operation."""


class NonFiniteState(CorrsimError):
    """A state update produced NaN or infinity."""


class EmptyBuffer(CorrsimError):
    """Command buffer queried while empty."""


class UnknownScenario(CorrsimError):
    """Scenario id not present in the task's scenario set."""


class EmptyEpisode(CorrsimError):
    """Episode has no step records."""


class EmptyDataset(CorrsimError):
    """Training requested on an empty dataset."""


class SchemaMismatch(CorrsimError):
    """Serialized episode header does not match the supported schema."""


class CorruptRecord(CorrsimError):
    """A serialized record line failed to parse."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DemoFailed(CorrsimError):
    """Scripted demonstrator failed repeatedly; indicates a plant or scripter bug."""


class MissingInitialData(CorrsimError):
    """Retraining requested without the initial demonstration set."""


class SecondClientRejected(CorrsimError):
    """The live service accepts a single controlling client."""
