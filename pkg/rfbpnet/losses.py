"""Losses used to train the Siamese extractor and the validators.

Batch losses return ``(loss, grads...)`` so the trainer can feed the
gradients straight into the layer backwards.
"""

import numpy as np
from scipy.special import log_softmax

from rfbpnet.utils import DimensionError, LabelError, ParameterError, check_finite


def softmax(logits):
    """Row-wise softmax of a [N, M] array."""
    return np.exp(log_softmax(logits, axis=1))


def softmax_cross_entropy(logits, targets):
    """Mean cross-entropy of softmax(logits) against integer targets.

    Args:
        logits: [N, M] scores.
        targets: [N] class indices in [0, M).
    Returns:
        (loss (float), grad_logits [N, M]) with grad = (P - onehot) / N
    Raises:
        LabelError: a target is outside [0, M).
    """
    logits = np.asarray(logits)
    targets = np.asarray(targets)
    if logits.ndim != 2:
        raise DimensionError('logits must be [N, M], got shape %s' % (logits.shape,))
    num, classes = logits.shape
    if targets.shape != (num,):
        raise DimensionError('targets shape %s does not match logits axis 0 (%d)'
                             % (targets.shape, num))
    if num == 0:
        return 0.0, np.zeros_like(logits)
    bad = targets[(targets < 0) | (targets >= classes)]
    if bad.size:
        raise LabelError('target class %d outside [0, %d)' % (int(bad[0]), classes))

    targets = targets.astype(np.intp)
    log_p = log_softmax(logits, axis=1)
    rows = np.arange(num)
    loss = float(-log_p[rows, targets].mean())
    grad = np.exp(log_p)
    grad[rows, targets] -= 1
    grad /= num
    return check_finite(loss, 'softmax_cross_entropy'), grad


def contrastive_loss(feat_a, feat_b, y_s, margin):
    """Contrastive loss of a single pair.

    (1 - y) * D^2 + y * max(0, margin - D)^2 with D the Euclidean distance.
    """
    dist = float(np.linalg.norm(np.asarray(feat_a, dtype=np.float64)
                                - np.asarray(feat_b, dtype=np.float64)))
    hinge = max(0.0, margin - dist)
    return (1 - y_s) * dist * dist + y_s * hinge * hinge


def contrastive_loss_batch(feat_a, feat_b, y_s, margin):
    """Mean contrastive loss over a batch of pairs.

    Args:
        feat_a, feat_b: [B, F] features of the two branches.
        y_s: [B] similarity labels, 0 for same user, 1 for different user.
        margin (float): hinge margin.
    Returns:
        (loss, dfeat_a, dfeat_b)
    """
    if feat_a.shape != feat_b.shape or feat_a.ndim != 2:
        raise DimensionError('branch features must share a [B, F] shape, got %s and %s'
                             % (feat_a.shape, feat_b.shape))
    batch = feat_a.shape[0]
    if batch == 0:
        return 0.0, np.zeros_like(feat_a), np.zeros_like(feat_b)
    y = np.asarray(y_s).astype(feat_a.dtype)
    diff = feat_a - feat_b
    dist = np.sqrt((diff * diff).sum(axis=1))
    hinge = np.maximum(margin - dist, 0)
    per_pair = (1 - y) * dist * dist + y * hinge * hinge
    loss = float(per_pair.mean())

    # d/d(diff) of each term: 2 diff for similar pairs, -2 hinge diff / D for dissimilar
    safe = np.where(dist > 0, dist, 1)
    coef = 2 * (1 - y) - 2 * y * hinge / safe
    dfeat_a = (coef[:, None] * diff / batch).astype(feat_a.dtype)
    return check_finite(loss, 'contrastive_loss'), dfeat_a, -dfeat_a


def identity_loss(logits_a, logits_b, id_label):
    """Identity loss of one pair; a label of -1 masks the pair out."""
    if id_label == -1:
        return 0.0
    if id_label < -1:
        raise LabelError('identity label %d is neither -1 nor a class index' % id_label)
    loss_a, _ = softmax_cross_entropy(np.atleast_2d(logits_a), np.array([id_label]))
    loss_b, _ = softmax_cross_entropy(np.atleast_2d(logits_b), np.array([id_label]))
    return 0.5 * (loss_a + loss_b)


def identity_loss_batch(logits_a, logits_b, id_labels):
    """Identity loss averaged over every pair of the batch.

    Masked pairs (label -1) count in the denominator but contribute neither
    loss nor gradient.

    Returns:
        (loss, dlogits_a, dlogits_b)
    """
    id_labels = np.asarray(id_labels)
    if id_labels.size and id_labels.min() < -1:
        raise LabelError('identity label %d is neither -1 nor a class index'
                         % int(id_labels.min()))
    dlogits_a = np.zeros_like(logits_a)
    dlogits_b = np.zeros_like(logits_b)
    batch = id_labels.shape[0]
    valid = id_labels >= 0
    count = int(valid.sum())
    if batch == 0 or count == 0:
        return 0.0, dlogits_a, dlogits_b

    loss_a, grad_a = softmax_cross_entropy(logits_a[valid], id_labels[valid])
    loss_b, grad_b = softmax_cross_entropy(logits_b[valid], id_labels[valid])
    scale = 0.5 * count / batch
    dlogits_a[valid] = grad_a * scale
    dlogits_b[valid] = grad_b * scale
    return scale * (loss_a + loss_b), dlogits_a, dlogits_b


def check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError('alpha must lie in [0, 1], got %r' % alpha)
    return alpha


def joint_loss(alpha, loss_c, loss_p):
    """alpha * LOSS_C + (1 - alpha) * LOSS_P"""
    check_alpha(alpha)
    if alpha == 1.0:
        return loss_c
    if alpha == 0.0:
        return loss_p
    return alpha * loss_c + (1 - alpha) * loss_p
