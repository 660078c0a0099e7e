"""Exception types shared across the package."""


class TravelTimeError(Exception):
    """Base class for every data/model error raised by this package."""


class CoincidentPoints(TravelTimeError):
    pass


class NonPositiveInput(TravelTimeError):
    pass


class EmptyNetwork(TravelTimeError):
    pass


class MalformedXml(TravelTimeError):
    pass


class DuplicateId(TravelTimeError):
    pass


class DanglingNodeRef(TravelTimeError):
    pass


class UnknownNode(TravelTimeError):
    pass


class Unreachable(TravelTimeError):
    pass


class TooFewEligibleNodes(TravelTimeError):
    pass


class EmptyTrainingSet(TravelTimeError):
    pass


class DimensionMismatch(TravelTimeError):
    pass


class EmptySpace(TravelTimeError):
    pass


class LengthMismatch(TravelTimeError):
    pass


class NonPositiveActual(TravelTimeError):
    pass


class BadFraction(TravelTimeError):
    pass


class TooFewSamples(TravelTimeError):
    pass


class BadProbabilities(TravelTimeError):
    pass


class FormatError(TravelTimeError):
    """A file did not match its expected schema."""
