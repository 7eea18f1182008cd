"""rfbpnet command line: synthesise, audit, train, extract and sweep."""

import argparse
import json
import logging
import os
import sys

from rfbpnet.checkpoint import load_checkpoint, save_checkpoint
from rfbpnet.config import build_config
from rfbpnet.dataset_store import (import_csv, read_dataset, read_normalizer, read_pairs,
                                   write_confusion_csv, write_dataset, write_json, write_normalizer,
                                   write_pairs, write_report)
from rfbpnet.experiment import Experiment, StageError, validate_source
from rfbpnet.pairing import build_pairs, pair_stats
from rfbpnet.preprocess import minmax_fit
from rfbpnet.rfbp_net import RfbpNet, extract_all
from rfbpnet.signal_synth import synth_dataset
from rfbpnet.sweep import parse_values, run_sweep
from rfbpnet.trainer import train, write_history
from rfbpnet.utils import (ConfigurationError, InvariantViolationError, ParameterError, RfbpError,
                           get_logger)
from rfbpnet.validators.evaluation import evaluate, evaluate_per_subject, feature_quality

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_INVARIANT = 4

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
OVERRIDE_FLAGS = ('alpha', 'pairs', 'batches', 'epochs', 'feature_size', 'activation', 'seed',
                  'out')


def setup_logging(log_level):
    """One stdout handler on the rfbpnet logger tree."""
    logger = logging.getLogger('rfbpnet')
    logger.setLevel(log_level)
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
    return logger


def _config(args):
    overrides = {flag: getattr(args, flag) for flag in OVERRIDE_FLAGS}
    config = build_config(args.config, args.preset, overrides)
    if args.dataset is not None:
        config.dataset = args.dataset
    if args.workers is not None:
        config.workers = args.workers
    return config


def _dataset(config):
    if config.dataset is None:
        raise ConfigurationError('--dataset (or "dataset" in the configuration) is required')
    return read_dataset(config.dataset)


def cmd_synth(args):
    config = _config(args)
    synth = config.synth
    synth.workers = config.workers
    dataset = synth_dataset(synth)
    manifest = write_dataset(dataset, config.out)
    print(json.dumps({'out': config.out, 'manifest': manifest.to_dict(),
                      'fingerprint': dataset.fingerprint()}, sort_keys=True, indent=2))


def cmd_validate_source(args):
    config = _config(args)
    if args.validators:
        config.validators = args.validators.split(',')
    table = validate_source(_dataset(config), config.validators, config.split, config.threshold,
                            config.workers)
    os.makedirs(config.out, exist_ok=True)
    write_json(table, os.path.join(config.out, 'source_validation.json'))
    print(json.dumps(table, sort_keys=True, indent=2))


def cmd_make_pairs(args):
    config = _config(args)
    dataset = _dataset(config)
    pairset = build_pairs(dataset, config.train.pairs, config.pair_seed, config.pair_balance)
    os.makedirs(config.out, exist_ok=True)
    path = os.path.join(config.out, 'pairs.csv')
    write_pairs(pairset, path)
    print(json.dumps(pair_stats(pairset, dataset), sort_keys=True, indent=2))


def cmd_train(args):
    config = _config(args)
    dataset = _dataset(config)
    if args.pairs_file is None:
        raise ConfigurationError('--pairs-file is required')
    pairset = read_pairs(args.pairs_file, dataset, config.pair_seed)
    experiment = Experiment(config, dataset=dataset, pairset=pairset, audit_source=False)
    normalizer = minmax_fit(dataset.samples) if config.normalize else None
    net = RfbpNet(experiment.extractor_config(), seed=config.train.seed)
    result = train(net, pairset, dataset, config.train, normalizer)
    os.makedirs(config.out, exist_ok=True)
    save_checkpoint(net, os.path.join(config.out, 'checkpoint.bin'))
    write_history(result.history, os.path.join(config.out, 'history.csv'))
    if normalizer is not None:
        write_normalizer(normalizer, os.path.join(config.out, 'normalizer'))
    print(json.dumps(result.history[-1]._asdict(), sort_keys=True))


def cmd_extract(args):
    config = _config(args)
    dataset = _dataset(config)
    if args.checkpoint is None:
        raise ConfigurationError('--checkpoint is required')
    net = load_checkpoint(args.checkpoint)
    normalizer = read_normalizer(args.normalizer) if args.normalizer else None
    features = extract_all(net, dataset, normalizer, config.workers)
    write_dataset(features, config.out)


def cmd_validate_features(args):
    config = _config(args)
    features = _dataset(config)
    os.makedirs(config.out, exist_ok=True)
    reports = {}
    for task in ('identity', 'behavior'):
        report = evaluate(features, task, args.evaluator or config.evaluator, config.split)
        reports[task] = report
        write_report(report, os.path.join(config.out, 'features_%s.json' % task))
        write_confusion_csv(report, os.path.join(config.out, 'features_%s_confusion.csv' % task))
    subjects = evaluate_per_subject(features, args.evaluator or config.evaluator, config.split)
    write_json(subjects._asdict(), os.path.join(config.out, 'features_per_subject.json'))
    print(json.dumps({'identity': reports['identity'].accuracy,
                      'behavior': reports['behavior'].accuracy,
                      'per_subject_behavior': subjects.mean_behavior_accuracy,
                      'feature_quality': feature_quality(reports['identity'],
                                                         reports['behavior'])},
                     sort_keys=True, indent=2))


def cmd_run(args):
    experiment = Experiment(_config(args)).run()
    print(json.dumps(experiment.summary['rows'], sort_keys=True, indent=2))


def cmd_sweep(args):
    config = _config(args)
    values = parse_values(args.parameter, args.values)
    result = run_sweep(args.parameter, values, config, workers=config.workers)
    os.makedirs(config.out, exist_ok=True)
    result.write(os.path.join(config.out, 'sweep_%s.csv' % args.parameter))
    best = result.best()
    write_json({'parameter': result.parameter, 'failures': result.failures,
                'best': best._asdict() if best is not None else None},
               os.path.join(config.out, 'sweep_%s.json' % args.parameter))
    sys.stdout.write(result.to_csv())


def cmd_import(args):
    config = _config(args)
    dataset = import_csv(args.csv, args.shape, config.out)
    print(json.dumps({'out': config.out, 'samples': dataset.num_samples,
                      'fingerprint': dataset.fingerprint()}, sort_keys=True))


COMMANDS = {
    'synth': cmd_synth,
    'validate-source': cmd_validate_source,
    'make-pairs': cmd_make_pairs,
    'train': cmd_train,
    'extract': cmd_extract,
    'validate-features': cmd_validate_features,
    'run': cmd_run,
    'sweep': cmd_sweep,
    'import': cmd_import,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON file with configuration fields')
    common.add_argument('--preset', choices=['rfid', 'wifi'], help='start from a preset')
    common.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    common.add_argument('--dataset', help='dataset directory')
    common.add_argument('--workers', type=int)
    common.add_argument('--alpha', type=float, help='contrastive weight of the joint loss')
    common.add_argument('--pairs', type=int, help='number of training pairs')
    common.add_argument('--batches', type=int, help='batches per epoch')
    common.add_argument('--epochs', type=int)
    common.add_argument('--feature-size', type=int)
    common.add_argument('--activation', help='final activation of the extractor')
    common.add_argument('--seed', type=int, help='seed of every random stream')
    common.add_argument('--out', help='output directory')

    parser = argparse.ArgumentParser(prog='rfbpnet', description=__doc__)
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        subparsers.add_parser(name, parents=[common])
    subparsers.choices['validate-source'].add_argument(
        '--validators', help='comma separated validator names')
    subparsers.choices['train'].add_argument('--pairs-file', help='pairs.csv to train on')
    subparsers.choices['extract'].add_argument('--checkpoint', help='checkpoint.bin')
    subparsers.choices['extract'].add_argument('--normalizer', help='normalizer directory')
    subparsers.choices['validate-features'].add_argument('--evaluator')
    subparsers.choices['sweep'].add_argument(
        '--parameter', required=True,
        choices=['pairs', 'alpha', 'feature_size', 'activation', 'users'])
    subparsers.choices['sweep'].add_argument('--values', nargs='+', required=True)
    subparsers.choices['import'].add_argument('--csv', required=True)
    subparsers.choices['import'].add_argument('--shape', type=int, nargs='+', required=True)
    return parser


def main(argv=None):
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    logger = get_logger('rfbpnet.cli')
    try:
        COMMANDS[args.command](args)
    except (ConfigurationError, ParameterError) as exception:
        logger.error('configuration error: %s', exception)
        return EXIT_CONFIG
    except InvariantViolationError as exception:
        logger.error('invariant violated: %s', exception)
        return EXIT_INVARIANT
    except StageError as exception:
        logger.error('%s', exception)
        if isinstance(exception.cause, InvariantViolationError):
            return EXIT_INVARIANT
        return EXIT_STAGE
    except (RfbpError, OSError) as exception:
        logger.error('%s failed: %s', args.command, exception)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
