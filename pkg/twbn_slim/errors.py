class SlimError(Exception):
    """Base class for every error raised by twbn_slim."""


class InputError(SlimError, ValueError):
    """Malformed input: bad files, mismatched vertex universes, v in its own parent set."""


class MissingParentSetError(SlimError, KeyError):
    def __init__(self, vertex: int, parents: frozenset[int]):
        self.vertex = vertex
        self.parents = parents
        super().__init__(f"parent set {sorted(parents)} of vertex {vertex} is not in the score cache")

    def __str__(self) -> str:
        return self.args[0]


class InitialSolutionError(SlimError):
    """The initial (D, T) pair cannot be used."""


class SubinstanceError(SlimError):
    """A local window could not be built."""


class EncodingError(SlimError):
    """The subinstance cannot be turned into a MaxSAT instance."""


class SolverProtocolError(SlimError):
    """A solver returned a model that does not satisfy the hard clauses."""


class OracleTooLargeError(SlimError):
    """The exhaustive oracle was asked to enumerate too many combinations."""


class MergeError(SlimError):
    """A local solution could not be glued back into the global tree decomposition."""
