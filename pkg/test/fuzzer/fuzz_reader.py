#!/usr/bin/env python3

"""Run AFL repeatedly with externally supplied generated file contents from STDIN."""

import os
import sys
import tempfile

import afl  # pylint: disable=import-error
from rfbpnet.checkpoint import unpack_checkpoint
from rfbpnet.dataset_store import FormatError, read_pairs, read_report
from rfbpnet.utils import InvariantViolationError

ROUNDS = 1


def main(reader):
    """Run AFL repeatedly with externally supplied generated file contents from STDIN."""

    while afl.loop(ROUNDS):
        # receive input from afl
        rcv = sys.stdin.read()
        data = None
        try:
            data = bytearray.fromhex(rcv)  # pytype: disable=missing-parameter
        except (ValueError, TypeError):
            return
        READERS[reader](bytes(data))


def test_checkpoint(data):
    """Tests the unpack_checkpoint function
    Args:
        data: checkpoint bytes"""
    try:
        unpack_checkpoint(data)
    except InvariantViolationError:
        # Corrupt checkpoints are rejected with CheckpointFormatError or CheckpointMismatchError.
        pass


def _with_file(data, suffix, read):
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, 'fuzz' + suffix)
        with open(path, 'wb') as stream:
            stream.write(data)
        try:
            read(path)
        except FormatError:
            # Ignore exceptions the readers intentionally throw, and are caught by the caller.
            pass


def test_pairs(data):
    """Tests the read_pairs function
    Args:
        data: pairs.csv contents"""
    _with_file(data, '.csv', read_pairs)


def test_report(data):
    """Tests the read_report function
    Args:
        data: report JSON contents"""
    _with_file(data, '.json', read_report)


READERS = {'checkpoint': test_checkpoint, 'pairs': test_pairs, 'report': test_report}


if __name__ == "__main__":
    main(sys.argv[1])
