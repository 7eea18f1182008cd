"""Evaluation reports: accuracy plus confusion matrix of one classifier on one task."""

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from sklearn.metrics import confusion_matrix

from rfbpnet.utils import InvariantViolationError

TASKS = ('identity', 'behavior')


@dataclass
class EvalReport:
    """Rows of confusion are true classes, columns predicted classes."""

    task: str
    model: str
    accuracy: float
    confusion: List[List[int]]
    per_class_accuracy: List[float]
    num_classes: int
    warnings: List[str] = field(default_factory=list)

    @classmethod
    def build(cls, task, model, y_true, y_pred, num_classes, warnings=None):
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        matrix = confusion_matrix(y_true, y_pred, labels=np.arange(num_classes))
        total = int(matrix.sum())
        accuracy = float(np.trace(matrix)) / total if total else 0.0
        row_sums = matrix.sum(axis=1)
        per_class = [float(matrix[k, k]) / row_sums[k] if row_sums[k] else 0.0
                     for k in range(num_classes)]
        return cls(task, model, accuracy, matrix.tolist(), per_class, int(num_classes),
                   list(warnings or []))

    @property
    def test_count(self):
        return int(np.asarray(self.confusion, dtype=np.int64).sum())

    def validate(self):
        """Raises InvariantViolationError unless accuracy is trace/total of a square matrix."""
        matrix = np.asarray(self.confusion, dtype=np.int64)
        if matrix.shape != (self.num_classes, self.num_classes):
            raise InvariantViolationError('confusion matrix of shape %s does not match %d classes'
                                          % (matrix.shape, self.num_classes))
        if np.any(matrix < 0):
            raise InvariantViolationError('confusion matrix holds negative counts')
        total = int(matrix.sum())
        expected = float(np.trace(matrix)) / total if total else 0.0
        if not math.isclose(self.accuracy, expected, rel_tol=1e-9, abs_tol=1e-12):
            raise InvariantViolationError('accuracy %r is not trace/total %r'
                                          % (self.accuracy, expected))
        if self.task not in TASKS:
            raise InvariantViolationError('unknown task %r' % self.task)
        return self

    def to_dict(self):
        return {'task': self.task, 'model': self.model, 'accuracy': self.accuracy,
                'confusion': self.confusion, 'per_class_accuracy': self.per_class_accuracy,
                'num_classes': self.num_classes, 'warnings': self.warnings}

    @classmethod
    def from_dict(cls, values):
        return cls(task=str(values['task']), model=str(values['model']),
                   accuracy=float(values['accuracy']),
                   confusion=[[int(cell) for cell in row] for row in values['confusion']],
                   per_class_accuracy=[float(value) for value in values['per_class_accuracy']],
                   num_classes=int(values['num_classes']),
                   warnings=[str(warning) for warning in values.get('warnings', [])])
