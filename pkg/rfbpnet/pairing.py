"""Contrastive training-set construction.

Random sample pairs are drawn with replacement and kept only when they match
one of two rules:

    rule 0: same identity, different behavior  -> y_s = 0, id_label = identity
    rule 1: different identity, same behavior  -> y_s = 1, id_label = -1

Everything else is discarded.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from rfbpnet.utils import (InvariantViolationError, PairRecord, ParameterError, RfbpError,
                           get_logger, make_rng)

BALANCES = ('none', 'equal')
DEFAULT_PAIRS = 1000
REJECTION_FACTOR = 10
DRAW_CHUNK = 4096
PAIRING_STREAM = 3

LOGGER = get_logger('rfbpnet.pairing')


class PairingError(RfbpError):
    """The pairing rules cannot be satisfied by the dataset labels."""


class IntegrityError(InvariantViolationError):
    """A pair set does not fit the dataset it claims to come from."""


@dataclass
class PairSet:
    records: List[PairRecord] = field(default_factory=list)
    dataset_id: Optional[str] = None
    seed: Optional[int] = None
    target_size: Optional[int] = None

    def __post_init__(self):
        if self.target_size is None:
            self.target_size = len(self.records)
        if len(self.records) != self.target_size:
            raise InvariantViolationError('pair set holds %d records, target size is %d'
                                          % (len(self.records), self.target_size))

    def __len__(self):
        return len(self.records)

    def subset(self, size):
        """The first size records, as a pair set of its own."""
        if not 0 <= size <= len(self.records):
            raise ParameterError('cannot take %d pairs from a set of %d'
                                 % (size, len(self.records)))
        return PairSet(self.records[:size], self.dataset_id, self.seed, size)

    def arrays(self):
        """(idx_a, idx_b, y_s, id_label) as int64 arrays."""
        table = np.array([tuple(record) for record in self.records], dtype=np.int64)
        table = table.reshape(len(self.records), 4)
        return table[:, 0], table[:, 1], table[:, 2], table[:, 3]


def diagnose_rules(identity, behavior):
    """Map each rule that can never fire (0 or 1) to a human-readable reason."""
    problems = {}
    users_per_behavior = {}
    behaviors_per_user = {}
    for user, action in zip(identity.tolist(), behavior.tolist()):
        users_per_behavior.setdefault(action, set()).add(user)
        behaviors_per_user.setdefault(user, set()).add(action)
    if not any(len(actions) > 1 for actions in behaviors_per_user.values()):
        problems[0] = ('rule 0 (same identity, different behavior) is unsatisfiable: '
                       'no identity has samples of two behaviors')
    if not any(len(users) > 1 for users in users_per_behavior.values()):
        problems[1] = ('rule 1 (different identity, same behavior) is unsatisfiable: '
                       'no behavior has samples of two identities')
    return problems


def _classify(identity, behavior, idx_a, idx_b):
    same_user = identity[idx_a] == identity[idx_b]
    same_behavior = behavior[idx_a] == behavior[idx_b]
    kind = np.full(idx_a.shape, -1, dtype=np.int64)
    kind[same_user & ~same_behavior] = 0
    kind[~same_user & same_behavior] = 1
    return kind


def build_pairs(dataset, size=DEFAULT_PAIRS, seed=0, balance='none'):
    """Draw size pairs that satisfy rule 0 or rule 1.

    Args:
        dataset (SignalDataset): labelled source samples.
        size (int): number of accepted pairs M.
        seed (int): pairing seed.
        balance (str): 'none' keeps whatever the draws give; 'equal' caps
            rule 0 at ceil(M / 2) and rule 1 at floor(M / 2).
    Returns:
        PairSet
    Raises:
        PairingError: fewer than 2 users or behaviors, a needed rule is
            unsatisfiable, or 10 * M * N consecutive draws were rejected.
    """
    if balance not in BALANCES:
        raise ParameterError('balance must be one of %s, got %r' % (', '.join(BALANCES), balance))
    if size < 0:
        raise ParameterError('pair count must be non-negative, got %d' % size)
    identity = dataset.identity
    behavior = dataset.behavior
    num_users = len(np.unique(identity))
    num_behaviors = len(np.unique(behavior))
    problems = diagnose_rules(identity, behavior)
    if num_users < 2 or num_behaviors < 2:
        reasons = '; '.join(problems.values()) or 'no rule fires'
        raise PairingError('pairing needs at least 2 identities and 2 behaviors, got %d and %d; %s'
                           % (num_users, num_behaviors, reasons))

    quota = None
    if balance == 'equal':
        quota = {0: (size + 1) // 2, 1: size // 2}
        needed = [problems[kind] for kind in sorted(problems) if quota[kind] > 0]
        if needed:
            raise PairingError('; '.join(needed))
    elif len(problems) == 2:
        raise PairingError('; '.join(problems.values()))

    reasons = '; '.join(problems.values())
    rng = make_rng(seed, PAIRING_STREAM)
    num_samples = dataset.num_samples
    cap = REJECTION_FACTOR * max(size, 1) * num_samples
    counts = {0: 0, 1: 0}
    records = []
    rejections = 0
    while len(records) < size:
        draws = rng.integers(0, num_samples, size=(DRAW_CHUNK, 2))
        kinds = _classify(identity, behavior, draws[:, 0], draws[:, 1])
        for (idx_a, idx_b), kind in zip(draws.tolist(), kinds.tolist()):
            if kind < 0 or (quota is not None and counts[kind] >= quota[kind]):
                rejections += 1
                if rejections >= cap:
                    raise PairingError('%d consecutive draws rejected after %d accepted pairs '
                                       '(rule 0: %d, rule 1: %d); %s'
                                       % (rejections, len(records), counts[0], counts[1],
                                          reasons or 'acceptance rate too low'))
                continue
            rejections = 0
            id_label = int(identity[idx_a]) if kind == 0 else -1
            records.append(PairRecord(idx_a, idx_b, kind, id_label))
            counts[kind] += 1
            if len(records) == size:
                break

    pairset = PairSet(records, dataset.fingerprint(), seed, size)
    LOGGER.info('built %d pairs (rule 0: %d, rule 1: %d, balance %s)',
                size, counts[0], counts[1], balance)
    return pairset


def pair_stats(pairset, dataset):
    """Counts per y_s and per identity label plus the unordered duplicate rate.

    Raises:
        IntegrityError: an index is out of range or a record breaks its rule.
    """
    identity = dataset.identity
    behavior = dataset.behavior
    for row, (idx_a, idx_b, y_s, id_label) in enumerate(pairset.records):
        for idx in (idx_a, idx_b):
            if not 0 <= idx < dataset.num_samples:
                raise IntegrityError('pair %d references sample %d, dataset has %d'
                                     % (row, idx, dataset.num_samples))
        kind = int(_classify(identity, behavior, np.array([idx_a]), np.array([idx_b]))[0])
        expected_label = int(identity[idx_a]) if kind == 0 else -1
        if kind != y_s or id_label != expected_label:
            raise IntegrityError('pair %d (%d, %d) is labelled y_s=%d id_label=%d but its samples '
                                 'give y_s=%d id_label=%d'
                                 % (row, idx_a, idx_b, y_s, id_label, kind, expected_label))

    total = len(pairset.records)
    by_kind = Counter(record.y_s for record in pairset.records)
    by_label = Counter(record.id_label for record in pairset.records)
    unique = len({(min(r.idx_a, r.idx_b), max(r.idx_a, r.idx_b)) for r in pairset.records})
    return {
        'total': total,
        'y_s': {str(kind): by_kind.get(kind, 0) for kind in (0, 1)},
        'id_label': {str(label): count for label, count in sorted(by_label.items())},
        'duplicate_rate': (total - unique) / total if total else 0.0,
    }
