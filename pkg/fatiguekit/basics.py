"""Basic elements of the fatigue model: muscles, their state, load samples and
the errors raised throughout fatiguekit.
"""

import math
from typing import NamedTuple


DEFAULT_K = 1.0
"""Rate constant in 1/min. Uncalibrated; override per muscle."""


class FatigueKitError(Exception):
    """Base class for every error raised by fatiguekit."""


class ParameterError(FatigueKitError, ValueError):
    """A numeric argument is outside its allowed range."""


class RejectedInputError(FatigueKitError, ValueError):
    """Input data is non-finite, negative or otherwise unusable."""


class DomainError(FatigueKitError, ValueError):
    """A time lies outside the domain of a profile or recording."""


class CapacityExhaustedError(FatigueKitError):
    """The current exertable force fell below the capacity floor, so the model
    has left its region of validity.
    """


class SchemaError(FatigueKitError, ValueError):
    """A document or posture does not match the expected structure."""


class ConfigurationError(FatigueKitError, ValueError):
    """A configuration value is inconsistent or missing."""


class InsufficientDataError(FatigueKitError, ValueError):
    """Not enough data to carry out the operation."""


class InvariantViolation(FatigueKitError):
    """An internal consistency check failed."""


class ParseError(FatigueKitError, ValueError):
    """A file could not be parsed.

    :param message: What went wrong
    :param line: The 1-based line number, if known
    :param filename: The name of the file, if known
    """

    def __init__(self, message, line=None, filename=None):
        self.line = line
        self.filename = filename
        where = []
        if filename:
            where.append(str(filename))
        if line is not None:
            where.append("line %d" % line)
        if where:
            message = "%s: %s" % (", ".join(where), message)
        super().__init__(message)


def require_positive(name, value):
    """Raise ParameterError unless value is a finite number > 0."""
    if not (isinstance(value, (int, float)) and math.isfinite(value)
            and value > 0):
        raise ParameterError("%s must be a finite number > 0, got %r"
                             % (name, value))
    return float(value)


class LoadSample(NamedTuple):
    """Demanded force on a muscle at one instant."""
    t: float
    f_load: float


class MuscleParameters():
    """Per-muscle constants of the fatigue model.

    :param muscle_id: identifier, unique within a worker profile
    :param mvc: maximum voluntary contraction force in newtons
    :param k: rate constant in 1/min
    """

    def __init__(self, muscle_id, mvc, k=DEFAULT_K):
        if not muscle_id or not str(muscle_id).strip():
            raise ParameterError("muscle_id must be non-empty")
        if any(char in str(muscle_id) for char in "/\\\0") or \
                str(muscle_id) in (".", ".."):
            raise ParameterError("muscle_id %r is not a plain name"
                                 % muscle_id)
        self._muscle_id = str(muscle_id)
        self._mvc = require_positive("mvc", mvc)
        self._k = require_positive("k", k)

    @property
    def muscle_id(self):
        """The identifier of this muscle."""
        return self._muscle_id

    @property
    def mvc(self):
        """Maximum voluntary contraction force in newtons."""
        return self._mvc

    @property
    def k(self):
        """Rate constant in 1/min."""
        return self._k

    def with_k(self, k):
        """A copy of these parameters with a different rate constant."""
        return MuscleParameters(self._muscle_id, self._mvc, k)

    def scaled(self, factor):
        """A copy with MVC multiplied by factor."""
        return MuscleParameters(self._muscle_id, self._mvc * factor, self._k)

    def __eq__(self, other):
        if not isinstance(other, MuscleParameters):
            return NotImplemented
        return (self._muscle_id, self._mvc, self._k) == (
            other.muscle_id, other.mvc, other.k)

    def __hash__(self):
        return hash((self._muscle_id, self._mvc, self._k))

    def __repr__(self):
        return "MuscleParameters(%r, mvc=%r, k=%r)" % (self._muscle_id,
                                                        self._mvc, self._k)


class MuscleState():
    """State of one muscle at time t.

    :param t: time in minutes
    :param fcem: current exertable maximum force in newtons
    :param f_acc: accumulated normalized load, dimensionless
    :param u: fatigue index in minutes
    """

    def __init__(self, t, fcem, f_acc, u):
        values = {"t": t, "fcem": fcem, "f_acc": f_acc, "u": u}
        for name, value in values.items():
            if not math.isfinite(value):
                raise RejectedInputError("%s must be finite, got %r"
                                         % (name, value))
        if fcem <= 0:
            raise RejectedInputError("fcem must be > 0, got %r" % fcem)
        for name in ("t", "f_acc", "u"):
            if values[name] < 0:
                raise RejectedInputError("%s must be >= 0, got %r"
                                         % (name, values[name]))
        self._t = float(t)
        self._fcem = float(fcem)
        self._f_acc = float(f_acc)
        self._u = float(u)

    @staticmethod
    def fresh(params, t=0.0):
        """The state of a rested muscle: full capacity, no history."""
        return MuscleState(t, params.mvc, 0.0, 0.0)

    @property
    def t(self):
        """Time in minutes."""
        return self._t

    @property
    def fcem(self):
        """Current exertable maximum force in newtons."""
        return self._fcem

    @property
    def f_acc(self):
        """Accumulated normalized load."""
        return self._f_acc

    @property
    def u(self):
        """Fatigue index in minutes."""
        return self._u

    def is_consistent(self, params, rel_tol=1e-9):
        """Does fcem agree with mvc * exp(-k * f_acc), and lie in (0, mvc]?"""
        if self._fcem > params.mvc * (1 + rel_tol):
            return False
        expected = params.mvc * math.exp(-params.k * self._f_acc)
        return math.isclose(self._fcem, expected, rel_tol=rel_tol)

    def __eq__(self, other):
        if not isinstance(other, MuscleState):
            return NotImplemented
        return ((self._t, self._fcem, self._f_acc, self._u) ==
                (other.t, other.fcem, other.f_acc, other.u))

    def __repr__(self):
        return ("MuscleState(t=%r, fcem=%r, f_acc=%r, u=%r)"
                % (self._t, self._fcem, self._f_acc, self._u))
