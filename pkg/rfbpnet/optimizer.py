"""Adam optimizer over a list of Parameters."""

import numpy as np

from rfbpnet.utils import NumericError, ParameterError, get_logger


class Adam:
    """Adam with bias-corrected moments.

    The moment buffers live on the Parameters themselves so a model can be
    checkpointed and cast without the optimizer.
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        if lr <= 0:
            raise ParameterError('learning rate must be positive, got %r' % lr)
        if not (0.0 <= betas[0] < 1.0 and 0.0 <= betas[1] < 1.0):
            raise ParameterError('betas must lie in [0, 1), got %r' % (betas,))
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.steps = 0
        self.logger = get_logger('rfbpnet.optimizer')

    def zero_grad(self):
        for param in self.params:
            param.zero_grad()

    def step(self):
        """Apply one update to every parameter in place.

        Raises:
            NumericError: a gradient holds NaN or Inf; no parameter is touched.
        """
        for param in self.params:
            if not np.all(np.isfinite(param.grad)):
                raise NumericError('non-finite gradient in parameter %s (shape %s) at step %d'
                                   % (param.name, param.shape, self.steps + 1))

        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for param in self.params:
            dtype = param.value.dtype
            grad = param.grad
            param.moment1 *= self.beta1
            param.moment1 += (1.0 - self.beta1) * grad
            param.moment2 *= self.beta2
            param.moment2 += (1.0 - self.beta2) * grad * grad
            m_hat = param.moment1 / correction1
            v_hat = param.moment2 / correction2
            param.value -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(dtype)
