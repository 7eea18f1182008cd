"""Persistent formats: datasets, pair sets, normalizers, reports.

A dataset directory holds:
    manifest.json  version, sample shape, count, provenance, seed
    data.f32       little-endian float32 samples, index order, row-major
    labels.csv     index,identity,behavior

Every reader re-validates what it reads and raises a FormatError subclass
instead of returning suspicious data.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from rfbpnet.pairing import PairSet
from rfbpnet.preprocess import Normalizer
from rfbpnet.utils import (ConfigurationError, DimensionError, InvariantViolationError, PairRecord,
                           get_logger)
from rfbpnet.validators.report import EvalReport

FORMAT_VERSION = 1
DTYPE = 'f32le'
BLOB_DTYPE = np.dtype('<f4')

MANIFEST_FILE = 'manifest.json'
DATA_FILE = 'data.f32'
LABELS_FILE = 'labels.csv'
NORMALIZER_FILE = 'normalizer.json'
NORMALIZER_DATA_FILE = 'normalizer.f32'

LABEL_COLUMNS = ['index', 'identity', 'behavior']
PAIR_COLUMNS = ['idx_a', 'idx_b', 'y_s', 'id_label']
MAX_LABEL = np.iinfo(np.int32).max

INTEGER_PATTERN = r'-?\d+'

LOGGER = get_logger('rfbpnet.dataset_store')


class FormatError(InvariantViolationError):
    """A persisted file does not follow its documented format."""


class SizeMismatchError(FormatError):
    """A binary blob does not have the size its manifest declares."""


class MalformedCsvError(FormatError):
    """A CSV file cannot be parsed or has the wrong columns."""


class UnknownVersionError(FormatError):
    """A manifest declares a format version this code does not read."""


class PairValidationError(FormatError):
    """A pairs file holds a record that breaks the pairing rules."""


@dataclass
class SignalDataset:
    """Fixed-shape samples with identity and behavior labels.

    Also used for extracted features, whose sample shape is [feature_size].
    """

    samples: np.ndarray
    identity: np.ndarray
    behavior: np.ndarray
    provenance: dict = field(default_factory=dict)
    seed: Optional[int] = None

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float32)
        self.identity = np.asarray(self.identity, dtype=np.int64).reshape(-1)
        self.behavior = np.asarray(self.behavior, dtype=np.int64).reshape(-1)
        if self.samples.ndim < 2:
            raise DimensionError('samples must be [N, ...], got shape %s' % (self.samples.shape,))
        if not len(self.identity) == len(self.behavior) == self.samples.shape[0]:
            raise DimensionError('label columns (%d, %d) do not match %d samples'
                                 % (len(self.identity), len(self.behavior), self.samples.shape[0]))

    @property
    def sample_shape(self):
        return tuple(self.samples.shape[1:])

    @property
    def num_samples(self):
        return self.samples.shape[0]

    @property
    def num_identities(self):
        return int(self.identity.max()) + 1 if self.num_samples else 0

    @property
    def num_behaviors(self):
        return int(self.behavior.max()) + 1 if self.num_samples else 0

    def labels(self, column):
        """Label column by task name, 'identity' or 'behavior'."""
        if column == 'identity':
            return self.identity
        if column == 'behavior':
            return self.behavior
        raise ConfigurationError("label column must be 'identity' or 'behavior', got %r" % column)

    def fingerprint(self):
        """Short content hash of samples and labels, used to tie pair sets to a dataset."""
        digest = hashlib.sha256()
        digest.update(np.asarray(self.samples.shape, dtype=np.int64).tobytes())
        digest.update(self.samples.astype(BLOB_DTYPE).tobytes())
        digest.update(self.identity.astype('<i8').tobytes())
        digest.update(self.behavior.astype('<i8').tobytes())
        return digest.hexdigest()[:16]

    def take(self, indices):
        indices = np.asarray(indices, dtype=np.intp)
        return SignalDataset(self.samples[indices], self.identity[indices], self.behavior[indices],
                             dict(self.provenance), self.seed)


@dataclass
class DatasetManifest:
    sample_shape: list
    num_samples: int
    provenance: dict = field(default_factory=dict)
    seed: Optional[int] = None
    version: int = FORMAT_VERSION
    dtype: str = DTYPE
    data_file: str = DATA_FILE
    labels_file: str = LABELS_FILE

    @property
    def expected_bytes(self):
        return int(self.num_samples) * int(np.prod(self.sample_shape, dtype=np.int64)) * 4

    def to_dict(self):
        return {
            'version': self.version,
            'sample_shape': [int(dim) for dim in self.sample_shape],
            'num_samples': int(self.num_samples),
            'dtype': self.dtype,
            'data_file': self.data_file,
            'labels_file': self.labels_file,
            'provenance': self.provenance,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, values):
        """Build a manifest from parsed JSON.

        Raises:
            UnknownVersionError: unsupported version.
            FormatError: missing or ill-typed fields.
        """
        if not isinstance(values, dict):
            raise FormatError('manifest must be a JSON object')
        version = values.get('version')
        if version != FORMAT_VERSION:
            raise UnknownVersionError('manifest version %r is not supported (expected %d)'
                                      % (version, FORMAT_VERSION))
        try:
            manifest = cls(sample_shape=[int(dim) for dim in values['sample_shape']],
                           num_samples=int(values['num_samples']),
                           provenance=values.get('provenance') or {},
                           seed=values.get('seed'),
                           version=version,
                           dtype=values['dtype'],
                           data_file=values['data_file'],
                           labels_file=values['labels_file'])
        except (KeyError, TypeError, ValueError) as exception:
            raise FormatError('manifest is missing or has an invalid field: %s' % exception) \
                from exception
        if manifest.dtype != DTYPE:
            raise FormatError('manifest dtype %r is not %r' % (manifest.dtype, DTYPE))
        if manifest.num_samples < 0 or any(dim < 1 for dim in manifest.sample_shape):
            raise FormatError('manifest declares an invalid shape %s x %s'
                              % (manifest.num_samples, manifest.sample_shape))
        return manifest


def _write_json(values, path):
    with open(path, 'w', encoding='utf-8') as stream:
        json.dump(values, stream, sort_keys=True, indent=2)
        stream.write('\n')


def _read_json(path):
    try:
        with open(path, 'r', encoding='utf-8') as stream:
            return json.load(stream)
    except (UnicodeDecodeError, json.JSONDecodeError) as exception:
        raise FormatError('%s is not valid JSON: %s' % (path, exception)) from exception


def write_json(values, path):
    """Write any JSON report with the canonical layout (sorted keys, indent 2)."""
    _write_json(values, path)


def read_json(path):
    return _read_json(path)


def _write_csv(frame, path):
    frame.to_csv(path, index=False, lineterminator='\n')


def _read_int_csv(path, columns):
    """Read a CSV whose cells are all integers, checking header and every cell."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exception:
        raise MalformedCsvError('%s cannot be parsed: %s' % (path, exception)) from exception
    if list(frame.columns) != columns:
        raise MalformedCsvError('%s header is %s, expected %s'
                                % (path, ','.join(map(str, frame.columns)), ','.join(columns)))
    for column in columns:
        bad = ~frame[column].str.fullmatch(INTEGER_PATTERN)
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise MalformedCsvError('%s row %d column %r is not an integer: %r'
                                    % (path, row + 1, column, frame[column].iloc[row]))
    return frame.astype(np.int64)


def write_dataset(dataset, directory):
    """Write dataset to directory as manifest.json, data.f32 and labels.csv."""
    os.makedirs(directory, exist_ok=True)
    manifest = DatasetManifest(sample_shape=list(dataset.sample_shape),
                               num_samples=dataset.num_samples,
                               provenance=dataset.provenance,
                               seed=dataset.seed)
    with open(os.path.join(directory, manifest.data_file), 'wb') as stream:
        stream.write(dataset.samples.astype(BLOB_DTYPE).tobytes(order='C'))
    labels = pd.DataFrame({'index': np.arange(dataset.num_samples, dtype=np.int64),
                           'identity': dataset.identity,
                           'behavior': dataset.behavior}, columns=LABEL_COLUMNS)
    _write_csv(labels, os.path.join(directory, manifest.labels_file))
    _write_json(manifest.to_dict(), os.path.join(directory, MANIFEST_FILE))
    LOGGER.info('wrote %d samples of shape %s to %s', dataset.num_samples,
                list(dataset.sample_shape), directory)
    return manifest


def read_dataset(directory):
    """Read and validate a dataset directory.

    Raises:
        UnknownVersionError, SizeMismatchError, MalformedCsvError, FormatError
    """
    manifest = DatasetManifest.from_dict(_read_json(os.path.join(directory, MANIFEST_FILE)))
    data_path = os.path.join(directory, manifest.data_file)
    found = os.path.getsize(data_path)
    if found != manifest.expected_bytes:
        raise SizeMismatchError('%s holds %d bytes, manifest declares %d samples of %s '
                                '(expected %d bytes)' % (data_path, found, manifest.num_samples,
                                                         manifest.sample_shape,
                                                         manifest.expected_bytes))
    blob = np.fromfile(data_path, dtype=BLOB_DTYPE)
    if not np.all(np.isfinite(blob)):
        raise FormatError('%s holds %d non-finite values'
                          % (data_path, np.count_nonzero(~np.isfinite(blob))))
    samples = blob.reshape([manifest.num_samples] + manifest.sample_shape).astype(np.float32)

    labels = _read_int_csv(os.path.join(directory, manifest.labels_file), LABEL_COLUMNS)
    if len(labels) != manifest.num_samples:
        raise MalformedCsvError('%s has %d rows for %d samples'
                                % (manifest.labels_file, len(labels), manifest.num_samples))
    if not np.array_equal(labels['index'].to_numpy(), np.arange(manifest.num_samples)):
        raise MalformedCsvError('%s indices must be 0..%d, ascending'
                                % (manifest.labels_file, manifest.num_samples - 1))
    for column in ('identity', 'behavior'):
        if (labels[column] < 0).any():
            raise MalformedCsvError('%s has a negative %s label' % (manifest.labels_file, column))
    return SignalDataset(samples, labels['identity'].to_numpy(), labels['behavior'].to_numpy(),
                         manifest.provenance, manifest.seed)


def import_csv(csv_path, shape, directory=None):
    """Convert a CSV of flattened samples into a dataset.

    Each row holds product(shape) sample values followed by the identity and
    behavior labels; there is no header.

    Raises:
        MalformedCsvError: a row has the wrong width, a non-numeric or non-finite cell,
            or a label that is not a non-negative integer.
    """
    shape = [int(dim) for dim in shape]
    width = int(np.prod(shape)) + 2
    try:
        table = np.loadtxt(csv_path, delimiter=',', dtype=np.float64, ndmin=2)
    except ValueError as exception:
        raise MalformedCsvError('%s: %s' % (csv_path, exception)) from exception
    if table.size == 0:
        table = np.zeros((0, width))
    if table.shape[1] != width:
        raise MalformedCsvError('%s row 1 has %d columns, expected %d for shape %s + 2 labels'
                                % (csv_path, table.shape[1], width, shape))
    if not np.all(np.isfinite(table)):
        row, column = (int(index) for index in np.argwhere(~np.isfinite(table))[0])
        raise MalformedCsvError('%s row %d column %d is not a finite number'
                                % (csv_path, row + 1, column + 1))
    labels = table[:, -2:]
    bad = (labels != np.round(labels)) | (labels < 0) | (labels > MAX_LABEL)
    if np.any(bad):
        row = int(np.flatnonzero(np.any(bad, axis=1))[0])
        raise MalformedCsvError('%s row %d has a label that is not a non-negative integer'
                                % (csv_path, row + 1))
    dataset = SignalDataset(table[:, :-2].reshape([len(table)] + shape), labels[:, 0], labels[:, 1],
                            provenance={'source': 'import_csv', 'path': os.path.basename(csv_path),
                                        'shape': shape})
    if directory is not None:
        write_dataset(dataset, directory)
    return dataset


def export_csv(dataset, csv_path):
    """Inverse of import_csv: one row per sample, values then identity and behavior."""
    flat = dataset.samples.reshape(dataset.num_samples, -1).astype(np.float64)
    table = np.column_stack([flat, dataset.identity, dataset.behavior]) if dataset.num_samples \
        else np.zeros((0, flat.shape[1] + 2))
    fmt = ['%.9g'] * flat.shape[1] + ['%d', '%d']
    np.savetxt(csv_path, table, fmt=fmt, delimiter=',')


def subset_dataset(dataset, identities):
    """Keep the samples of the given identities, relabelled 0..k-1 in sorted order."""
    identities = sorted(int(identity) for identity in identities)
    keep = np.flatnonzero(np.isin(dataset.identity, identities))
    remap = {identity: new for new, identity in enumerate(identities)}
    subset = dataset.take(keep)
    subset.identity = np.array([remap[int(identity)] for identity in subset.identity],
                               dtype=np.int64)
    subset.provenance = dict(dataset.provenance, identities=identities)
    return subset


def write_pairs(pairset, path):
    records = pairset.records
    frame = pd.DataFrame(np.array([tuple(record) for record in records], dtype=np.int64)
                         .reshape(len(records), 4), columns=PAIR_COLUMNS)
    _write_csv(frame, path)


def read_pairs(path, dataset=None, seed=None):
    """Read pairs.csv, checking every record against the pairing rules.

    With a dataset, indices are range-checked and the labels of both samples
    are checked against y_s and id_label.

    Raises:
        MalformedCsvError, PairValidationError
    """
    frame = _read_int_csv(path, PAIR_COLUMNS)
    values = frame.to_numpy()
    records = []
    for row, (idx_a, idx_b, y_s, id_label) in enumerate(values, start=1):
        if y_s not in (0, 1):
            raise PairValidationError('%s row %d: y_s must be 0 or 1, got %d' % (path, row, y_s))
        if y_s == 1 and id_label != -1:
            raise PairValidationError('%s row %d: dissimilar pair carries identity label %d, '
                                      'expected -1' % (path, row, id_label))
        if y_s == 0 and id_label < 0:
            raise PairValidationError('%s row %d: similar pair carries identity label %d'
                                      % (path, row, id_label))
        if dataset is not None:
            _check_pair_against(dataset, path, row, idx_a, idx_b, y_s, id_label)
        records.append(PairRecord(int(idx_a), int(idx_b), int(y_s), int(id_label)))
    dataset_id = dataset.fingerprint() if dataset is not None else None
    return PairSet(records, dataset_id=dataset_id, seed=seed, target_size=len(records))


# pylint: disable=too-many-arguments
def _check_pair_against(dataset, path, row, idx_a, idx_b, y_s, id_label):
    for idx in (idx_a, idx_b):
        if not 0 <= idx < dataset.num_samples:
            raise PairValidationError('%s row %d: index %d outside [0, %d)'
                                      % (path, row, idx, dataset.num_samples))
    same_user = dataset.identity[idx_a] == dataset.identity[idx_b]
    same_behavior = dataset.behavior[idx_a] == dataset.behavior[idx_b]
    if y_s == 0 and not (same_user and not same_behavior and id_label == dataset.identity[idx_a]):
        raise PairValidationError('%s row %d: similar pair does not join one user across two '
                                  'behaviors' % (path, row))
    if y_s == 1 and not (not same_user and same_behavior):
        raise PairValidationError('%s row %d: dissimilar pair does not join two users on one '
                                  'behavior' % (path, row))


def write_report(report, path):
    _write_json(report.to_dict(), path)


def read_report(path):
    """Read an EvalReport, re-checking that accuracy equals trace/total."""
    values = _read_json(path)
    try:
        report = EvalReport.from_dict(values)
    except (KeyError, TypeError, ValueError) as exception:
        raise FormatError('%s is not an evaluation report: %s' % (path, exception)) from exception
    try:
        report.validate()
    except InvariantViolationError as exception:
        raise FormatError('%s: %s' % (path, exception)) from exception
    return report


def write_confusion_csv(report, path):
    """Confusion matrix with a 'true' column naming the class of each row."""
    matrix = np.asarray(report.confusion, dtype=np.int64)
    frame = pd.DataFrame(matrix, columns=['pred_%d' % label for label in range(matrix.shape[1])])
    frame.insert(0, 'true', np.arange(matrix.shape[0], dtype=np.int64))
    _write_csv(frame, path)


def write_normalizer(normalizer, directory):
    """normalizer.json plus normalizer.f32 holding x_min then x_max."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, NORMALIZER_DATA_FILE), 'wb') as stream:
        stream.write(normalizer.x_min.astype(BLOB_DTYPE).tobytes())
        stream.write(normalizer.x_max.astype(BLOB_DTYPE).tobytes())
    _write_json({'version': FORMAT_VERSION, 'dtype': DTYPE, 'data_file': NORMALIZER_DATA_FILE,
                 'sample_shape': [int(dim) for dim in normalizer.x_min.shape]},
                os.path.join(directory, NORMALIZER_FILE))


def read_normalizer(directory):
    values = _read_json(os.path.join(directory, NORMALIZER_FILE))
    if not isinstance(values, dict) or values.get('version') != FORMAT_VERSION:
        raise UnknownVersionError('normalizer version %r is not supported'
                                  % (values.get('version') if isinstance(values, dict) else None))
    try:
        shape = [int(dim) for dim in values['sample_shape']]
        data_path = os.path.join(directory, values['data_file'])
    except (KeyError, TypeError, ValueError) as exception:
        raise FormatError('normalizer manifest is invalid: %s' % exception) from exception
    expected = 2 * int(np.prod(shape)) * 4
    found = os.path.getsize(data_path)
    if found != expected:
        raise SizeMismatchError('%s holds %d bytes, expected %d' % (data_path, found, expected))
    blob = np.fromfile(data_path, dtype=BLOB_DTYPE).astype(np.float32)
    if not np.all(np.isfinite(blob)):
        raise FormatError('%s holds non-finite extrema' % data_path)
    half = blob.size // 2
    x_min = blob[:half].reshape(shape)
    x_max = blob[half:].reshape(shape)
    if np.any(x_max < x_min):
        raise FormatError('%s has x_max below x_min' % data_path)
    return Normalizer(x_min, x_max)
