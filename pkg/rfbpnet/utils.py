"""Utility Functions"""
import logging
from collections import namedtuple  # pytype: disable=pyi-error

import numpy as np


def get_logger(logname):
    """Create and return a logger object."""
    logger = logging.getLogger(logname)
    return logger


def log_method(method):
    """Generate method for logging"""

    def wrapped(self, *args, **kwargs):
        """Method that gets called for logging"""
        self.logger.debug('Entering %s', method.__name__)
        return method(self, *args, **kwargs)

    wrapped.__name__ = method.__name__
    wrapped.__doc__ = method.__doc__
    return wrapped


def make_rng(seed, *stream):
    """Build a numpy Generator from an explicit seed and optional stream tags.

    Args:
        seed (int): experiment seed.
        *stream (int): extra integers that select an independent stream.
    Returns:
        numpy.random.Generator
    """
    if seed is None:
        raise ConfigurationError("a seed is required, ambient randomness is not allowed")
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [int(s) for s in stream]))


def check_finite(array, what):
    """Raise NumericError if array holds NaN or Inf."""
    if not np.all(np.isfinite(array)):
        raise NumericError("non-finite values produced by %s" % what)
    return array


class RfbpError(Exception):
    """Base error for everything raised on purpose by rfbpnet."""


class DimensionError(RfbpError):
    """Array shapes do not line up."""


class StateError(RfbpError):
    """An operation was called without the state it depends on."""


class ConfigurationError(RfbpError):
    """A configuration value is invalid or inconsistent."""


class ParameterError(RfbpError):
    """A numeric parameter is outside its allowed range."""


class LabelError(RfbpError):
    """A class label is outside the range of known classes."""


class NumericError(RfbpError):
    """NaN or Inf appeared where finite values are required."""


class InvariantViolationError(RfbpError):
    """Data read or produced breaks a documented invariant."""


class PairRecord(namedtuple('PairRecord', 'idx_a idx_b y_s id_label')):
    """One contrastive training sample: two sample indices and their labels."""
