"""Sample preprocessing: min-max normalisation, Butterworth low-pass, segmentation."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import signal

from rfbpnet.utils import DimensionError, InvariantViolationError, ParameterError

ANTENNA_PAIRS = 9
SUBCARRIERS = 56
CSI_STREAMS = ANTENNA_PAIRS * SUBCARRIERS


class Normalizer:
    """Per-position extrema of a training set.

    Positions where x_max == x_min are degenerate and normalise to 0.
    """

    def __init__(self, x_min, x_max):
        self.x_min = np.ascontiguousarray(x_min, dtype=np.float32)
        self.x_max = np.ascontiguousarray(x_max, dtype=np.float32)
        if self.x_min.shape != self.x_max.shape:
            raise DimensionError('x_min shape %s differs from x_max shape %s'
                                 % (self.x_min.shape, self.x_max.shape))
        if np.any(self.x_max < self.x_min):
            raise InvariantViolationError('normalizer has x_max below x_min')

    @property
    def sample_shape(self):
        return self.x_min.shape

    @property
    def degenerate(self):
        return self.x_max == self.x_min

    def _check_shape(self, samples):
        if samples.shape != self.sample_shape and samples.shape[1:] != self.sample_shape:
            raise DimensionError('sample shape %s does not match normalizer shape %s'
                                 % (samples.shape, self.sample_shape))

    def apply(self, samples):
        """(x - x_min) / (x_max - x_min), no clamping; accepts one sample or a batch."""
        samples = np.asarray(samples)
        self._check_shape(samples)
        low = self.x_min.astype(np.float64)
        span = self.x_max.astype(np.float64) - low
        out = np.divide(samples.astype(np.float64) - low, span,
                        out=np.zeros(np.broadcast(samples, span).shape), where=span > 0)
        return out.astype(np.float32)

    def invert(self, normalized):
        """Map normalised values back; degenerate positions come back as x_min."""
        normalized = np.asarray(normalized)
        self._check_shape(normalized)
        low = self.x_min.astype(np.float64)
        span = self.x_max.astype(np.float64) - low
        return (normalized.astype(np.float64) * span + low).astype(np.float32)


def minmax_fit(train_samples):
    """Fit a Normalizer on [N, ...] training samples.

    Raises:
        ParameterError: fewer than two samples.
    """
    train_samples = np.asarray(train_samples)
    if train_samples.ndim < 2 or train_samples.shape[0] < 2:
        raise ParameterError('min-max fitting needs at least 2 training samples, got %d'
                             % (train_samples.shape[0] if train_samples.ndim else 0))
    return Normalizer(train_samples.min(axis=0), train_samples.max(axis=0))


def minmax_apply(normalizer, samples):
    return normalizer.apply(samples)


def minmax_invert(normalizer, samples):
    return normalizer.invert(samples)


@dataclass
class FilterSpec:
    """Butterworth low-pass; cutoff is a fraction of the Nyquist frequency."""

    order: int = 5
    cutoff: float = 0.1

    def validate(self):
        if int(self.order) != self.order or self.order < 1:
            raise ParameterError('filter order must be a positive integer, got %r' % self.order)
        if not 0.0 < self.cutoff < 1.0:
            raise ParameterError('filter cutoff must lie in (0, 1) of Nyquist, got %r'
                                 % self.cutoff)
        return self

    def sos(self):
        """Second-order sections of the bilinear-transform design."""
        self.validate()
        return signal.butter(int(self.order), self.cutoff, btype='low', output='sos')

    def to_dict(self):
        return asdict(self)


def butterworth_lowpass(series, spec=None, axis=-1):
    """Causal low-pass of series along axis.

    Raises:
        ParameterError: invalid spec, or series not longer than 3 * order.
    """
    spec = (spec or FilterSpec()).validate()
    series = np.asarray(series)
    length = series.shape[axis]
    if length <= 3 * spec.order:
        raise ParameterError('series of length %d is too short for an order %d filter '
                             '(needs more than %d)' % (length, spec.order, 3 * spec.order))
    filtered = signal.sosfilt(spec.sos(), series.astype(np.float64), axis=axis)
    if np.issubdtype(series.dtype, np.floating):
        return filtered.astype(series.dtype)
    return filtered


def filter_response(spec=None, freqs=512):
    """Frequency response of the filter.

    Returns:
        (frequencies as fractions of Nyquist, complex response)
    """
    spec = (spec or FilterSpec()).validate()
    omega, response = signal.sosfreqz(spec.sos(), worN=freqs)
    return omega / np.pi, response


def segment(series, window, stride):
    """Cut [channels, T] into floor((T - window) / stride) + 1 windows, in order."""
    series = np.asarray(series)
    if series.ndim < 1:
        raise DimensionError('cannot segment a scalar')
    if window < 1 or stride < 1:
        raise ParameterError('window and stride must be positive, got %r and %r'
                             % (window, stride))
    length = series.shape[-1]
    if window > length:
        raise DimensionError('window %d is longer than the series (T=%d)' % (window, length))
    count = (length - window) // stride + 1
    return [series[..., start * stride:start * stride + window] for start in range(count)]


def csi_to_samples(csi, spec=None, window=10, stride=10):
    """Shape a CSI recording into [num_windows, 9, 56, window] samples.

    Args:
        csi: [504, T] streams ordered (tx, rx, subcarrier), or [3, 3, 56, T].
            Complex values are reduced to their amplitude.
        spec (FilterSpec): low-pass applied to every stream before segmenting.
    """
    csi = np.asarray(csi)
    if np.iscomplexobj(csi):
        csi = np.abs(csi)
    if csi.ndim == 4 and csi.shape[:3] == (3, 3, SUBCARRIERS):
        csi = csi.reshape(CSI_STREAMS, csi.shape[-1])
    if csi.ndim != 2 or csi.shape[0] != CSI_STREAMS:
        raise DimensionError('CSI must be [%d, T] or [3, 3, %d, T], got shape %s'
                             % (CSI_STREAMS, SUBCARRIERS, csi.shape))
    filtered = butterworth_lowpass(csi.astype(np.float32), spec, axis=-1)
    windows = segment(filtered, window, stride)
    return np.stack([win.reshape(ANTENNA_PAIRS, SUBCARRIERS, window) for win in windows])
