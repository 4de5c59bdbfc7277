"""Exception hierarchy shared by all modules."""


class DsgError(Exception):
    """Base class for every error raised by dsgtrack."""


class InputError(DsgError):
    """Malformed or inconsistent input data (maps to CLI exit code 1)."""


# geometry
class NonPositiveDepth(DsgError):
    pass


class TooFewPoints(DsgError):
    pass


class NoConsensus(DsgError):
    pass


class EmptyModel(InputError):
    pass


class LengthMismatch(InputError):
    pass


class EmptyTrajectory(InputError):
    pass


# scene graph
class SchemaError(InputError):
    pass


class DanglingReference(SchemaError):
    pass


class EmptyGraph(DsgError):
    pass


class NoMatch(DsgError):
    pass


class UnknownNode(InputError, KeyError):
    pass


class NotADrawer(InputError):
    pass


# interaction
class OutOfOrder(InputError):
    pass


class InsufficientSamples(DsgError):
    pass


# tracker
class ObjectNotVisible(DsgError):
    pass


class UnknownObject(InputError):
    pass


class TrackingLost(DsgError):
    pass


class AlreadyEnded(DsgError):
    pass


# sim
class ScenarioError(InputError):
    pass


class InvisibleAction(ScenarioError):
    pass
