"""The end-to-end workflow as a state machine.

    IDLE -> SOURCE_VALIDATED -> PAIRS_BUILT -> TRAINED -> EXTRACTED -> EVALUATED

Each state's on-enter method runs one stage and writes its outputs under
config.out before the next stage starts, so a failure leaves the outputs
of the finished stages in place and moves the machine to FAILED.
"""

import copy
import os

from transitions import Machine, State
from transitions.extensions import GraphMachine

from rfbpnet.checkpoint import save_checkpoint
from rfbpnet.dataset_store import (read_dataset, write_confusion_csv, write_dataset, write_json,
                                   write_normalizer, write_pairs, write_report)
from rfbpnet.pairing import build_pairs, pair_stats
from rfbpnet.preprocess import minmax_fit
from rfbpnet.rfbp_net import RfbpNet, extract_all
from rfbpnet.signal_synth import synth_dataset
from rfbpnet.trainer import train, write_history
from rfbpnet.utils import RfbpError, get_logger, log_method
from rfbpnet.validators.evaluation import (chance, evaluate, evaluate_per_subject,
                                           feature_quality, run_suite)

VALID = 'VALID'
INVALID = 'INVALID'


class StageError(RfbpError):
    """A workflow stage failed; stage names it and __cause__ holds the original error."""

    def __init__(self, stage, cause):
        super().__init__('stage %s failed: %s' % (stage, cause))
        self.stage = stage
        self.cause = cause


def validate_source(dataset, validators, split_spec, threshold, workers=1):
    """Per-validator identity and behavior accuracy on raw samples.

    The data is VALID when, for each task, the best validator exceeds threshold.
    """
    reports = run_suite(dataset, validators, split_spec=split_spec, workers=workers)
    rows = []
    for index in range(0, len(reports), 2):
        identity, behavior = reports[index], reports[index + 1]
        rows.append({'validator': identity.model, 'identity': identity.accuracy,
                     'behavior': behavior.accuracy})
    best_identity = max(row['identity'] for row in rows)
    best_behavior = max(row['behavior'] for row in rows)
    flag = VALID if best_identity > threshold and best_behavior > threshold else INVALID
    return {'rows': rows, 'threshold': threshold, 'flag': flag,
            'chance': {'identity': chance(dataset.num_identities),
                       'behavior': chance(dataset.num_behaviors)}}


class Experiment:
    """One configured run of the workflow; call run() and read summary afterwards."""

    # pylint: disable=too-many-instance-attributes

    IDLE = 'IDLE'
    SOURCE_VALIDATED = 'SOURCE_VALIDATED'
    PAIRS_BUILT = 'PAIRS_BUILT'
    TRAINED = 'TRAINED'
    EXTRACTED = 'EXTRACTED'
    EVALUATED = 'EVALUATED'
    FAILED = 'FAILED'

    INITIAL_STATE = IDLE
    PROGRESS_STATES = [
        State(IDLE),
        State(SOURCE_VALIDATED, 'source_validated_state'),
        State(PAIRS_BUILT, 'pairs_built_state'),
        State(TRAINED, 'trained_state'),
        State(EXTRACTED, 'extracted_state'),
    ]
    SUCCESS_STATES = [State(EVALUATED, 'evaluated_state')]
    FAILURE_STATES = [State(FAILED, 'failed_state')]
    COMPLETION_STATES = [EVALUATED, FAILED]
    STATES = PROGRESS_STATES + SUCCESS_STATES + FAILURE_STATES

    STAGE_ORDER = [IDLE, SOURCE_VALIDATED, PAIRS_BUILT, TRAINED, EXTRACTED, EVALUATED]
    STAGE_NAMES = {SOURCE_VALIDATED: 'validate-source', PAIRS_BUILT: 'make-pairs', TRAINED: 'train',
                   EXTRACTED: 'extract', EVALUATED: 'validate-features'}

    ERROR_TRANSITIONS = [
        {'trigger': 'process', 'source': '*', 'dest': FAILED, 'conditions': ['_has_failed'],
         'unless': ['_is_failed']},
    ]
    CORE_TRANSITIONS = [
        {'trigger': 'process', 'source': source, 'dest': dest,
         'unless': ['_has_failed', '_reached_goal']}
        for source, dest in zip(STAGE_ORDER, STAGE_ORDER[1:])
    ]
    TRANSITIONS = ERROR_TRANSITIONS + CORE_TRANSITIONS

    state = None

    # pylint: disable=too-many-arguments
    def __init__(self, config, dataset=None, pairset=None, audit_source=True, logger=None):
        """
        Args:
            config (ExperimentConfig): the run; validated here.
            dataset (SignalDataset): source data to use instead of config.dataset/config.synth.
            pairset (PairSet): fundamental pair set; the run trains on its first
                config.train.pairs records instead of drawing new pairs.
            audit_source (bool): run the source validators and the evaluator on
                raw samples; sweeps switch this off.
        """
        self.config = config.validate()
        self.logger = logger or get_logger('rfbpnet.experiment')
        self.dataset = dataset
        self.pairset = pairset
        self.audit_source = audit_source
        self.goal = self.EVALUATED
        self.error = None
        self.failed_stage = None

        self.normalizer = None
        self.source = None
        self.net = None
        self.history = None
        self.features = None
        self.reports = {}
        self.subject_report = None
        self.summary = None

        self.machine = Machine(model=self, states=self.STATES, transitions=self.TRANSITIONS,
                               queued=True, initial=self.INITIAL_STATE)

    @classmethod
    def build_state_graph(cls, filename):
        "Draw the stage graph, failure transitions included, into filename."
        model = type('model', (object,), {})()
        GraphMachine(model=model, states=cls.STATES, title=cls.__name__,
                     transitions=cls.TRANSITIONS, queued=True, initial=cls.INITIAL_STATE)
        # pylint: disable=no-member
        # pytype: disable=attribute-error
        model.get_graph().draw(filename, prog='dot')

    #
    # State Transition Helpers
    #
    def _has_failed(self):  # pylint: disable=missing-docstring
        return self.error is not None

    def _is_failed(self):  # pylint: disable=missing-docstring
        return self.state == self.FAILED

    def _reached_goal(self):  # pylint: disable=missing-docstring
        return self.state == self.goal

    def path(self, *parts):
        return os.path.join(self.config.out, *parts)

    def _stage(self, work):
        """Run work for the current state, recording instead of raising failures."""
        try:
            work()
        except (RfbpError, OSError, ValueError) as exception:
            self.failed_stage = self.STAGE_NAMES[self.state]
            self.logger.error('stage %s failed: %s', self.failed_stage, exception)
            self.error = exception

    #
    # State Functionality
    #
    @log_method
    def source_validated_state(self):  # pylint: disable=missing-docstring
        self._stage(self.prepare_source)

    @log_method
    def pairs_built_state(self):  # pylint: disable=missing-docstring
        self._stage(self.make_pairs)

    @log_method
    def trained_state(self):  # pylint: disable=missing-docstring
        self._stage(self.train_model)

    @log_method
    def extracted_state(self):  # pylint: disable=missing-docstring
        self._stage(self.extract_features)

    @log_method
    def evaluated_state(self):  # pylint: disable=missing-docstring
        self._stage(self.evaluate_features)

    @log_method
    def failed_state(self):  # pylint: disable=missing-docstring
        self.logger.warning('run stopped in stage %s, earlier outputs kept in %s',
                            self.failed_stage, self.config.out)

    #
    # Stages
    #
    def prepare_source(self):
        """Load or synthesise the source data, fit the normalizer and audit the data.

        The normalizer is fitted on every source sample, because the RFBP-Net training
        set is the whole source set. That includes the samples the feature audit later
        holds out as its test split.
        """
        config = self.config
        os.makedirs(config.out, exist_ok=True)
        if self.dataset is None:
            if config.dataset is not None:
                self.dataset = read_dataset(config.dataset)
            else:
                synth = copy.deepcopy(config.synth)
                synth.workers = config.workers
                self.dataset = synth_dataset(synth)
                write_dataset(self.dataset, self.path('source'))
        if config.normalize:
            self.normalizer = minmax_fit(self.dataset.samples)
            write_normalizer(self.normalizer, self.path('normalizer'))
        if self.audit_source:
            self.source = validate_source(self.dataset, config.validators, config.split,
                                          config.threshold, config.workers)
            write_json(self.source, self.path('source_validation.json'))
            self.logger.info('source data is %s', self.source['flag'])
            if self.source['flag'] == INVALID:
                self.logger.warning('source data does not carry both identity and behavior '
                                    'information above %.2f', config.threshold)

    def make_pairs(self):
        config = self.config
        if self.pairset is not None:
            self.pairset = self.pairset.subset(config.train.pairs)
        else:
            self.pairset = build_pairs(self.dataset, config.train.pairs, config.pair_seed,
                                       config.pair_balance)
        stats = pair_stats(self.pairset, self.dataset)
        self.logger.info('pair set: %d pairs, y_s %s, duplicate rate %.3f', stats['total'],
                         stats['y_s'], stats['duplicate_rate'])
        write_pairs(self.pairset, self.path('pairs.csv'))

    def extractor_config(self):
        """The configured extractor, fitted to the sample shape and identity count of the data."""
        extractor = copy.deepcopy(self.config.extractor)
        shape = list(self.dataset.sample_shape)
        if extractor.input_shape != shape or extractor.num_identities != \
                self.dataset.num_identities:
            self.logger.info('extractor sized for samples %s and %d identities', shape,
                             self.dataset.num_identities)
        extractor.input_shape = shape
        extractor.num_identities = self.dataset.num_identities
        return extractor

    def train_model(self):
        config = self.config
        self.net = RfbpNet(self.extractor_config(), seed=config.train.seed)
        result = train(self.net, self.pairset, self.dataset, config.train, self.normalizer,
                       self.logger)
        self.history = result.history
        write_history(self.history, self.path('history.csv'))
        save_checkpoint(self.net, self.path('checkpoint.bin'))

    def extract_features(self):
        self.features = extract_all(self.net, self.dataset, self.normalizer, self.config.workers)
        write_dataset(self.features, self.path('features'))

    def _evaluate(self, name, dataset):
        os.makedirs(self.path('reports'), exist_ok=True)
        for task in ('identity', 'behavior'):
            report = evaluate(dataset, task, self.config.evaluator, self.config.split)
            self.reports[(name, task)] = report
            write_report(report, self.path('reports', '%s_%s.json' % (name, task)))
            write_confusion_csv(report, self.path('reports', '%s_%s_confusion.csv'
                                                  % (name, task)))

    def evaluate_features(self):
        """Designated evaluator on features; raw samples and per-subject behavior when auditing."""
        if self.audit_source:
            self._evaluate('original', self.dataset)
        self._evaluate('rfbp_net', self.features)
        if self.audit_source:
            self.subject_report = evaluate_per_subject(self.features, self.config.evaluator,
                                                       self.config.split)
            write_json(self.subject_report._asdict(),
                       self.path('reports', 'rfbp_net_per_subject.json'))
        self.summary = self.build_summary()
        write_json(self.summary, self.path('summary.json'))
        self.logger.info('features: identity %.4f behavior %.4f quality %.4f',
                         self.summary['rows']['identity']['rfbp_net'],
                         self.summary['rows']['behavior']['rfbp_net'],
                         self.summary['feature_quality'])

    def build_summary(self):
        """Rows identity and behavior; columns chance, original and rfbp_net."""
        rows = {}
        for task, classes in (('identity', self.dataset.num_identities),
                              ('behavior', self.dataset.num_behaviors)):
            original = self.reports.get(('original', task))
            rows[task] = {'chance': chance(classes),
                          'original': original.accuracy if original else None,
                          'rfbp_net': self.reports[('rfbp_net', task)].accuracy}
        run_config = self.config.to_dict()
        del run_config['out'], run_config['workers']
        summary = {'evaluator': self.config.evaluator, 'rows': rows,
                   'feature_quality': feature_quality(self.reports[('rfbp_net', 'identity')],
                                                      self.reports[('rfbp_net', 'behavior')]),
                   'source': self.source['flag'] if self.source else None,
                   'dataset_fingerprint': self.dataset.fingerprint(),
                   'config': run_config}
        if self.audit_source:
            summary['original_quality'] = feature_quality(
                self.reports[('original', 'identity')], self.reports[('original', 'behavior')])
        if self.subject_report is not None:
            summary['per_subject'] = self.subject_report._asdict()
        return summary

    def run(self, until=EVALUATED):
        """Advance stage by stage up to and including until.

        Raises:
            StageError: naming the stage that failed.
        """
        self.goal = until
        last_state = None
        while self.state != last_state:
            last_state = self.state
            self.process()  # pylint: disable=no-member # pytype: disable=attribute-error
        if self.state == self.FAILED:
            raise StageError(self.failed_stage, self.error) from self.error
        return self
