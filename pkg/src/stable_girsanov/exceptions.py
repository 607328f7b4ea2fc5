"""Exception hierarchy shared by all modules."""


class GirsanovError(Exception):
    """Base class for errors raised by this package."""


class DomainError(GirsanovError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class ConfigError(GirsanovError, ValueError):
    """Invalid or inconsistent configuration.

    ``key`` names the offending configuration entry when one is known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ThinningError(GirsanovError, RuntimeError):
    """A thinning acceptance ratio exceeded one: the documented bounds are wrong."""


class JClassViolation(GirsanovError, ValueError):
    """The jump functional fails the Kato-type integrability test."""


class QuadratureError(GirsanovError, RuntimeError):
    """A numerical integral produced a non-finite value."""
