"""Central finite-difference gradient checks.

The checks are report-only; the caller decides what error is acceptable.
Everything here is meant to run on float64 copies of the layers.
"""

from collections import namedtuple

import numpy as np

GradCheckReport = namedtuple('GradCheckReport', 'max_rel_error per_array')

REL_ERROR_FLOOR = 1e-6


def numerical_gradient(loss_fn, array, step=1e-5):
    """Central differences of a scalar loss_fn() with respect to array.

    array is perturbed in place and restored element by element.
    """
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    flat_grad = grad.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + step
        plus = loss_fn()
        flat[index] = original - step
        minus = loss_fn()
        flat[index] = original
        flat_grad[index] = (plus - minus) / (2 * step)
    return grad


def relative_error(analytic, numeric, floor=REL_ERROR_FLOOR):
    """max |a - n| / max(max |a|, max |n|, floor)"""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), floor)
    return float(np.abs(analytic - numeric).max() / scale)


def numeric_grad_check(loss_fn, arrays, analytic, step=1e-5):
    """Compare analytic gradients with central differences.

    Args:
        loss_fn: callable with no arguments returning a float; it must read
            the arrays being checked.
        arrays (dict): name -> array that loss_fn depends on (perturbed in place).
        analytic (dict): name -> analytic gradient for the same names.
    Returns:
        GradCheckReport
    """
    per_array = {}
    for name, array in arrays.items():
        numeric = numerical_gradient(loss_fn, array, step)
        per_array[name] = relative_error(analytic[name], numeric)
    max_rel = max(per_array.values()) if per_array else 0.0
    return GradCheckReport(max_rel, per_array)


def nudge_off_kinks(array, margin=1e-3):
    """Move values closer than margin to zero out to +-margin, in place."""
    close = np.abs(array) < margin
    array[close] = np.where(array[close] >= 0, margin, -margin)
    return array


def check_layer_gradients(layer, x, rng, train=True, step=1e-5):
    """Gradient check of a layer (or Sequential) under a random linear read-out.

    The scalar loss is sum(forward(x) * r) for a fixed random r, so the
    upstream gradient fed to backward is r itself.

    Returns:
        GradCheckReport covering the input and every parameter.
    """
    out, _ = layer.forward(x, train)
    readout = rng.standard_normal(out.shape)

    def loss_fn():
        value, _ = layer.forward(x, train)
        return float((value * readout).sum())

    for param in layer.parameters():
        param.zero_grad()
    _, cache = layer.forward(x, train)
    dx = layer.backward(readout, cache)

    arrays = {'input': x}
    analytic = {'input': dx}
    for param in layer.parameters():
        arrays[param.name] = param.value
        analytic[param.name] = param.grad.copy()
    return numeric_grad_check(loss_fn, arrays, analytic, step)
