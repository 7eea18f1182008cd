"""Checkpoint files for RfbpNet.

Layout:
    8 bytes   magic b'RFBPCKPT'
    4 bytes   header length, uint32 little-endian
    header    JSON: architecture, parameter manifest (name, kind, shape, offset), metadata
    blob      little-endian float32 arrays in manifest order
"""

import json
import struct

import numpy as np

from rfbpnet.rfbp_net import ExtractorConfig, RfbpNet
from rfbpnet.utils import ConfigurationError, DimensionError, InvariantViolationError, get_logger

MAGIC = b'RFBPCKPT'
HEADER_LENGTH = struct.Struct('<I')
CHECKPOINT_VERSION = 1
BLOB_DTYPE = np.dtype('<f4')

LOGGER = get_logger('rfbpnet.checkpoint')


class CheckpointFormatError(InvariantViolationError):
    """The checkpoint file is truncated or corrupt."""


class CheckpointMismatchError(InvariantViolationError):
    """The checkpoint does not fit the architecture it is loaded into."""


def _state(net):
    """(name, kind, array) of every parameter and buffer in blob order."""
    state = [(param.name, 'parameter', param.value) for param in net.parameters()]
    state += [(name, 'buffer', array) for name, array in net.buffers()]
    return state


def pack_checkpoint(net, metadata=None):
    """Serialise net to bytes."""
    manifest = []
    blobs = []
    offset = 0
    for name, kind, array in _state(net):
        data = np.ascontiguousarray(array, dtype=BLOB_DTYPE).tobytes()
        manifest.append({'name': name, 'kind': kind, 'shape': list(array.shape),
                         'offset': offset})
        blobs.append(data)
        offset += len(data)
    header = {'version': CHECKPOINT_VERSION,
              'architecture': net.config.to_dict(),
              'parameters': manifest,
              'metadata': net.metadata if metadata is None else metadata}
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    return MAGIC + HEADER_LENGTH.pack(len(header_bytes)) + header_bytes + b''.join(blobs)


def save_checkpoint(net, path, metadata=None):
    with open(path, 'wb') as stream:
        stream.write(pack_checkpoint(net, metadata))
    LOGGER.info('saved checkpoint to %s', path)


def _parse_header(data):
    if len(data) < len(MAGIC) + HEADER_LENGTH.size or not data.startswith(MAGIC):
        raise CheckpointFormatError('not a checkpoint: missing %r magic' % MAGIC)
    start = len(MAGIC) + HEADER_LENGTH.size
    (length,) = HEADER_LENGTH.unpack_from(data, len(MAGIC))
    if start + length > len(data):
        raise CheckpointFormatError('header declares %d bytes, only %d remain'
                                    % (length, len(data) - start))
    try:
        header = json.loads(data[start:start + length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as exception:
        raise CheckpointFormatError('checkpoint header is not valid JSON: %s' % exception) \
            from exception
    if not isinstance(header, dict) or header.get('version') != CHECKPOINT_VERSION:
        raise CheckpointFormatError('unsupported checkpoint header version')
    return header, data[start + length:]


def _config_differences(found, expected):
    found_dict, expected_dict = found.to_dict(), expected.to_dict()
    return ['%s: checkpoint has %r, expected %r' % (key, found_dict[key], expected_dict[key])
            for key in sorted(found_dict) if found_dict[key] != expected_dict[key]]


def _parse_manifest(manifest):
    """[(name, shape, offset, count)] with offsets checked against the packed layout."""
    entries = []
    offset = 0
    for entry in manifest:
        shape = tuple(int(dim) for dim in entry['shape'])
        if any(dim < 0 for dim in shape):
            raise ValueError('negative dimension in %s' % (shape,))
        if int(entry['offset']) != offset:
            raise ValueError('array %s starts at byte %s, expected %d'
                             % (entry['name'], entry['offset'], offset))
        count = int(np.prod(shape, dtype=np.int64))
        entries.append((str(entry['name']), shape, offset, count))
        offset += count * BLOB_DTYPE.itemsize
    return entries, offset


def unpack_checkpoint(data, expected_config=None):
    """Rebuild an RfbpNet from checkpoint bytes.

    Raises:
        CheckpointFormatError: truncated, corrupt or inconsistent data.
        CheckpointMismatchError: architecture differs from expected_config.
    """
    header, blob = _parse_header(data)
    try:
        config = ExtractorConfig.from_dict(header['architecture']).validate()
        entries, expected_bytes = _parse_manifest(header['parameters'])
    except (KeyError, TypeError, ValueError, AttributeError, ConfigurationError,
            DimensionError) as exception:
        raise CheckpointFormatError('checkpoint header is incomplete: %s' % exception) \
            from exception
    if len(blob) != expected_bytes:
        raise CheckpointFormatError('parameter blob holds %d bytes, manifest expects %d'
                                    % (len(blob), expected_bytes))
    if expected_config is not None:
        differences = _config_differences(config, expected_config)
        if differences:
            raise CheckpointMismatchError('checkpoint architecture mismatch: %s'
                                          % '; '.join(differences))

    net = RfbpNet(config)
    state = _state(net)
    if len(state) != len(entries):
        raise CheckpointMismatchError('checkpoint has %d arrays, architecture needs %d'
                                      % (len(entries), len(state)))
    for (name, _, array), (entry_name, shape, offset, count) in zip(state, entries):
        if entry_name != name or shape != array.shape:
            raise CheckpointMismatchError('array %s %s in checkpoint, architecture expects %s %s'
                                          % (entry_name, list(shape), name, list(array.shape)))
        values = np.frombuffer(blob, dtype=BLOB_DTYPE, count=count, offset=offset)
        array[...] = values.reshape(shape)
    metadata = header.get('metadata')
    net.metadata = metadata if isinstance(metadata, dict) else {}
    return net


def load_checkpoint(path, expected_config=None):
    with open(path, 'rb') as stream:
        data = stream.read()
    try:
        return unpack_checkpoint(data, expected_config)
    except CheckpointFormatError as exception:
        raise CheckpointFormatError('%s: %s' % (path, exception)) from exception
