# -*- coding: utf-8 -*-
"""
Command-line surface of the package, installed as ``perceptual-dro``.

Every command writes its primary outputs in a fixed order with fixed float
precision and stores the resolved configuration next to each output as
``<output>.config.json``.

Exit statuses: 0 on success, 1 when the computation fails, 2 on a usage
error (bad flags, missing inputs, empty sweeps).
"""
import argparse
import logging
import os
import sys

from . import __version__
from .attack import (ATTACK_REPORT_HEADER, AttackConfig, ablation_sweep,
                     attack_report_rows, defense_success_rate, success_rate)
from .classifier import (ARCHITECTURES, Model, TrainConfig, accuracy,
                         load_checkpoint, mean_loss, save_checkpoint,
                         sgd_train)
from .cost import COST_NAMES, make_cost
from .defense import DEFENSE_KINDS, Defense
from .dro import (WEIGHT_MODES, DroConfig, dro_train,
                  generate_robust_dataset, population_accuracy,
                  read_population, read_robust_dataset,
                  robust_dataset_paths, sample_model_population,
                  write_population, write_robust_dataset)
from .exceptions import CapabilityException, PerceptualDroException
from .fairness import (AUDIT_HEADER, BETA_SUMMARY_HEADER, WEIGHTINGS,
                       audit_population, beta_summary, gls_fit,
                       group_accuracy, grouped_dataset_paths,
                       make_grouped_dataset, read_group_meta,
                       read_group_records, read_grouped_dataset,
                       two_sample_t_test, write_group_records,
                       write_grouped_dataset)
from .formats import load_idx, write_config_record, write_csv, write_idx, \
    write_pgm
from .image import make_prototype_dataset

logger = logging.getLogger(__name__)

METHODS = {
    'ssim-onestep': 'ssim_one_step',
    'pgd-onestep': 'pgd_one_step',
    'pgd': 'pgd_iterative',
    'perceptual': 'perceptual',
}

DRO_ATTACK_METHODS = ('perceptual', 'pgd')

TRAIN_METRICS_HEADER = ('accuracy', 'loss', 'seed')
DEFENSE_HEADER = ('defense', 'defense_param', 'method', 'a', 'success_rate')
ABLATION_HEADER = ('lambda', 'epsilon', 'success_rate', 'one_minus_ssim')
POPULATION_HEADER = ('models', 'mean_accuracy', 'min_accuracy',
                     'max_accuracy')
T_TEST_HEADER = ('t', 'df', 'p_value')

EXIT_FAILURE = 1


def number_list(kind):
    """argparse type for comma separated lists of ``kind``."""
    def parse(text):
        try:
            return [kind(item) for item in text.split(',') if item.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(
                "'%s' is not a comma separated list" % text)
    return parse


def _record(path, args, **configs):
    resolved = dict((key, value) for key, value in vars(args).items()
                    if key not in ('handler', 'inputs', 'parser', 'workers'))
    resolved.update(configs)
    write_config_record(path, resolved)


def _ensure_parent(path):
    parent = os.path.dirname(path)
    if parent and not os.path.isdir(parent):
        os.makedirs(parent)


def _attack_config(args, prefix=''):
    method = getattr(args, prefix + 'method')
    cost_name = getattr(args, prefix + 'cost')
    if cost_name is None:
        cost_name = 'ssim-global' if method == 'ssim-onestep' \
            else 'ssim-windowed'
    cost = make_cost(cost_name)
    if method == 'ssim-onestep' and not cost.supports_hessian:
        raise CapabilityException(
            "Method %s cannot run with cost %s; it needs the Hessian of"
            " ssim-global" % (method, cost_name))
    return AttackConfig(
        method=METHODS[method],
        epsilon=getattr(args, prefix + 'epsilon'),
        penalty=getattr(args, prefix + 'lambda'),
        confidence=getattr(args, prefix + 'confidence'),
        max_iterations=getattr(args, prefix + 'iters'),
        cost=cost)


def _dataset(args):
    dataset = load_idx(args.images, args.labels, args.classes)
    if getattr(args, 'limit', None):
        dataset = dataset.subset(range(min(args.limit, len(dataset))))
    return dataset


def _dro_config(args):
    attack = AttackConfig()
    if hasattr(args, 'attack_method'):
        attack = _attack_config(args, 'attack_')
    return DroConfig(
        outer_steps=getattr(args, 't1', 0),
        epochs=getattr(args, 't2', 0),
        learning_rate=args.alpha,
        attack=attack,
        weight_mode=args.weight_mode,
        run_count=getattr(args, 'runs', 1),
        radius=args.radius)


def _population_row(models, summary):
    return (len(models), summary.mean, summary.minimum, summary.maximum)


def cmd_train(args):
    """Train a baseline classifier."""
    dataset = _dataset(args)
    cfg = TrainConfig(args.lr, args.epochs, args.batch_size, args.seed)
    template = Model.zeros(args.arch, dataset.image_shape,
                           dataset.class_count)
    model = sgd_train(template, dataset, cfg)
    _ensure_parent(args.out)
    save_checkpoint(model, args.out)
    _record(args.out, args, train=cfg.as_dict())
    metrics = args.metrics or args.out + '.metrics.csv'
    row = (accuracy(model, dataset), mean_loss(model, dataset), args.seed)
    write_csv(metrics, TRAIN_METRICS_HEADER, [row])
    _record(metrics, args, train=cfg.as_dict())
    logger.info("Training accuracy %.4f, loss %.4f", row[0], row[1])
    return 0


def cmd_attack(args):
    """Attack every correctly classified example and report."""
    cfg = _attack_config(args)
    model = load_checkpoint(args.model)
    dataset = _dataset(args)
    report = success_rate(model, dataset, cfg, args.workers)
    _ensure_parent(args.out)
    write_csv(args.out, ATTACK_REPORT_HEADER, attack_report_rows(report, cfg))
    _record(args.out, args, attack=cfg.as_dict())
    if args.export_images:
        if not os.path.isdir(args.export_images):
            os.makedirs(args.export_images)
        for index, result in report.results:
            write_pgm(result.adversarial, os.path.join(
                args.export_images, 'adv_%05d.pgm' % index))
    logger.info("Success rate %.4f (%d of %d)", report.rate, report.attacked,
                report.eligible)
    return 0


def cmd_defense_eval(args):
    """Success rate of attacks passed through a defense, over a sweep."""
    if not args.sweep:
        args.parser.error("--sweep needs at least one value")
    defenses = [Defense(args.defense, value) for value in args.sweep]
    model = load_checkpoint(args.model)
    dataset = _dataset(args)
    rows = []
    configs = []
    for confidence in args.confidence:
        args_cfg = argparse.Namespace(**vars(args))
        args_cfg.confidence = confidence
        cfg = _attack_config(args_cfg)
        configs.append(cfg.as_dict())
        report = success_rate(model, dataset, cfg, args.workers)
        for defense in defenses:
            rate = defense_success_rate(model, dataset, cfg, defense,
                                        report=report)
            rows.append((defense.kind, defense.value, args.method,
                         confidence, rate))
            logger.info("%s, a=%g: success rate %.4f", defense, confidence,
                        rate)
    _ensure_parent(args.out)
    write_csv(args.out, DEFENSE_HEADER, rows)
    _record(args.out, args, attacks=configs)
    return 0


def cmd_ablation(args):
    """Success rate and SSIM distance over lambda and epsilon grids."""
    if not args.lambdas or not args.epsilons:
        args.parser.error("--lambdas and --epsilons need at least one value")
    cfg = _attack_config(args)
    model = load_checkpoint(args.model)
    dataset = _dataset(args)
    rows = ablation_sweep(model, dataset, cfg, args.lambdas, args.epsilons,
                          args.workers)
    _ensure_parent(args.out)
    write_csv(args.out, ABLATION_HEADER, rows)
    _record(args.out, args, attack=cfg.as_dict())
    return 0


def cmd_dro_gen(args):
    """Grow a robust dataset."""
    cfg = _dro_config(args)
    model = load_checkpoint(args.model)
    dataset = _dataset(args)
    robust, final = generate_robust_dataset(model, dataset, cfg, args.seed)
    _ensure_parent(args.out)
    paths = write_robust_dataset(robust, args.out)
    for path in paths:
        _record(path, args, dro=cfg.as_dict(),
                diagnostics=robust.diagnostics.as_dict())
    if args.final_model:
        save_checkpoint(final, args.final_model)
        _record(args.final_model, args, dro=cfg.as_dict())
    logger.info("Robust dataset of %d entries written to %s*", len(robust),
                args.out)
    return 0


def cmd_dro_train(args):
    """Weighted retraining on a robust dataset."""
    cfg = _dro_config(args)
    model = load_checkpoint(args.model)
    robust = read_robust_dataset(args.robust, args.classes)
    trained = dro_train(model, robust, cfg, args.seed)
    _ensure_parent(args.out)
    save_checkpoint(trained, args.out)
    _record(args.out, args, dro=cfg.as_dict())
    return 0


def cmd_dro_sample(args):
    """Sample a population of retrained models."""
    if bool(args.images) != bool(args.labels):
        args.parser.error("--images and --labels go together")
    cfg = _dro_config(args)
    model = load_checkpoint(args.model)
    robust = read_robust_dataset(args.robust, args.classes)
    models = sample_model_population(model, robust, cfg, args.seed,
                                     args.workers)
    paths = write_population(models, args.out)
    for path in paths:
        _record(path, args, dro=cfg.as_dict())
    evaluation = _dataset(args) if args.images else robust.dataset
    summary = population_accuracy(models, evaluation, args.workers)
    accuracy_path = os.path.join(args.out, 'accuracy.csv')
    write_csv(accuracy_path, POPULATION_HEADER,
              [_population_row(models, summary)])
    _record(accuracy_path, args, dro=cfg.as_dict())
    logger.info("Population accuracy mean %.4f, range [%.4f, %.4f]",
                summary.mean, summary.minimum, summary.maximum)
    return 0


def _grouped(args):
    dataset, meta = read_grouped_dataset(args.data, args.classes)
    if args.groups:
        meta = read_group_meta(args.groups)
    return dataset, meta


def _population(directory, parser):
    models = read_population(directory)
    if not models:
        parser.error("'%s' holds no model_*.ckpt checkpoints" % directory)
    return models


def cmd_fairness_audit(args):
    """GLS slope audit of every model of a directory."""
    models = _population(args.models, args.parser)
    dataset, meta = _grouped(args)
    results = audit_population(models, dataset, meta, args.weighting,
                               args.workers, min_models=1)
    _ensure_parent(args.out)
    write_csv(args.out, AUDIT_HEADER,
              [result.row(index) for index, result in enumerate(results)])
    _record(args.out, args)
    summary_path = args.out + '.beta-summary.csv'
    write_csv(summary_path, BETA_SUMMARY_HEADER, [beta_summary(results)])
    _record(summary_path, args)
    accuracy_path = args.out + '.accuracy.csv'
    write_csv(accuracy_path, POPULATION_HEADER, [_population_row(
        models, population_accuracy(models, dataset, args.workers))])
    _record(accuracy_path, args)
    return 0


def cmd_fairness_compare(args):
    """Welch t-test between the slope populations of two directories."""
    dataset, meta = _grouped(args)
    betas = []
    for directory in (args.a, args.b):
        models = _population(directory, args.parser)
        results = audit_population(models, dataset, meta, args.weighting,
                                   args.workers)
        betas.append([result.beta for result in results])
    result = two_sample_t_test(betas[0], betas[1], args.alternative)
    _ensure_parent(args.out)
    write_csv(args.out, T_TEST_HEADER, [tuple(result)])
    _record(args.out, args)
    logger.info("t=%.4f, df=%.2f, p=%.5g", *result)
    return 0


def cmd_fairness_synth(args):
    """Write a synthetic grouped dataset with a planted income effect."""
    base = _dataset(args)
    dataset, meta = make_grouped_dataset(base, args.groups, args.slope,
                                         args.noise, args.seed)
    _ensure_parent(args.out)
    for path in write_grouped_dataset(dataset, meta, args.out):
        _record(path, args)
    return 0


def cmd_fairness_groups(args):
    """Per-group accuracy counts of one model."""
    model = load_checkpoint(args.model)
    dataset, meta = _grouped(args)
    _ensure_parent(args.out)
    write_group_records(group_accuracy(model, dataset, meta), args.out)
    _record(args.out, args)
    return 0


def cmd_fairness_fit(args):
    """GLS slope fit of a grouped-accuracy table."""
    result = gls_fit(read_group_records(args.records), args.weighting)
    _ensure_parent(args.out)
    write_csv(args.out, AUDIT_HEADER,
              [result.row(os.path.basename(args.records))])
    _record(args.out, args)
    return 0


def cmd_synth_digits(args):
    """Write the prototype-digit dataset as 8-bit IDX files."""
    dataset = make_prototype_dataset(args.count, args.seed, args.size,
                                     args.classes, args.noise,
                                     args.prototype_seed)
    images_path = args.out + '-images-idx3-ubyte'
    labels_path = args.out + '-labels-idx1-ubyte'
    _ensure_parent(images_path)
    write_idx(dataset, images_path, labels_path)
    for path in (images_path, labels_path):
        _record(path, args)
    return 0


def _add_data(parser, required=True):
    parser.add_argument('--images', required=required,
                        help='IDX image file')
    parser.add_argument('--labels', required=required,
                        help='IDX label file')
    parser.add_argument('--limit', type=int, default=None,
                        help='use only the first LIMIT examples')


def _add_attack(parser, prefix='', methods=tuple(METHODS)):
    option = '--' + prefix
    dest = prefix.replace('-', '_')
    parser.add_argument(option + 'method', dest=dest + 'method',
                        choices=methods, default='perceptual')
    parser.add_argument(option + 'epsilon', dest=dest + 'epsilon',
                        type=float, default=0.1, help='step size')
    parser.add_argument(option + 'lambda', dest=dest + 'lambda', type=float,
                        default=1.0, help='cost penalty')
    parser.add_argument(option + 'iters', dest=dest + 'iters', type=int,
                        default=100, help='iteration budget')
    parser.add_argument(option + 'cost', dest=dest + 'cost',
                        choices=COST_NAMES, default=None,
                        help='ground cost (default: ssim-global for'
                        ' ssim-onestep, ssim-windowed otherwise)')


def _add_dro(parser):
    parser.add_argument('--alpha', type=float, default=0.1,
                        help='learning rate')
    parser.add_argument('--weight-mode', choices=WEIGHT_MODES,
                        default='normalized')
    parser.add_argument('--radius', type=float, default=0.0,
                        help='ambiguity radius, recorded only')
    parser.add_argument('--seed', type=int, default=0)


def _add_grouped(parser):
    parser.add_argument('--data', required=True,
                        help='prefix of a grouped dataset written by'
                        ' "fairness synth"')
    parser.add_argument('--groups', default=None,
                        help='group_id,g CSV overriding the dataset groups')
    parser.add_argument('--weighting', choices=WEIGHTINGS, default='sqrt')


def _command(subparsers, name, handler, inputs=(), **kwargs):
    parser = subparsers.add_parser(name, help=handler.__doc__, **kwargs)
    parser.set_defaults(handler=handler, inputs=inputs, parser=parser)
    return parser


def build_parser():
    """The argument parser of every command."""
    #pylint: disable=too-many-statements
    parser = argparse.ArgumentParser(
        prog='perceptual-dro',
        description='Perceptual adversarial attacks, distributionally robust'
        ' training and group-fairness audits.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true')
    verbosity.add_argument('-q', '--quiet', action='store_true')
    parser.add_argument('--workers', type=int, default=None,
                        help='worker threads (default: $PERCEPTUAL_DRO_WORKERS'
                        ' or the CPU count)')
    parser.add_argument('--classes', type=int, default=10)
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    train = _command(commands, 'train', cmd_train,
                     (('images', 'file'), ('labels', 'file')))
    _add_data(train)
    train.add_argument('--arch', choices=ARCHITECTURES, default='convnet')
    train.add_argument('--epochs', type=int, default=3)
    train.add_argument('--lr', type=float, default=0.1)
    train.add_argument('--batch-size', type=int, default=32)
    train.add_argument('--seed', type=int, default=0)
    train.add_argument('--out', required=True, help='checkpoint path')
    train.add_argument('--metrics', default=None,
                       help='metrics CSV (default: OUT.metrics.csv)')

    model_inputs = (('model', 'file'), ('images', 'file'),
                    ('labels', 'file'))
    attack = _command(commands, 'attack', cmd_attack, model_inputs)
    attack.add_argument('--model', required=True)
    _add_data(attack)
    _add_attack(attack)
    attack.add_argument('--confidence', type=float, default=0.0)
    attack.add_argument('--export-images', default=None, metavar='DIR')
    attack.add_argument('--out', required=True, help='report CSV')

    defense = _command(commands, 'defense-eval', cmd_defense_eval,
                       model_inputs)
    defense.add_argument('--model', required=True)
    _add_data(defense)
    _add_attack(defense)
    defense.add_argument('--confidence', type=number_list(float),
                         default=[0.0], help='comma separated values of a')
    defense.add_argument('--defense', choices=DEFENSE_KINDS, required=True)
    defense.add_argument('--sweep', type=number_list(int), required=True,
                         help='comma separated bit depths or qualities')
    defense.add_argument('--out', required=True)

    ablation = _command(commands, 'ablation', cmd_ablation, model_inputs)
    ablation.add_argument('--model', required=True)
    _add_data(ablation)
    _add_attack(ablation)
    ablation.add_argument('--confidence', type=float, default=0.0)
    ablation.add_argument('--lambdas', type=number_list(float),
                          required=True)
    ablation.add_argument('--epsilons', type=number_list(float),
                          required=True)
    ablation.add_argument('--out', required=True)

    dro = commands.add_parser('dro', help='distributionally robust training')
    dro_commands = dro.add_subparsers(dest='dro_command', metavar='STAGE')
    dro_commands.required = True

    gen = _command(dro_commands, 'gen', cmd_dro_gen, model_inputs)
    gen.add_argument('--model', required=True)
    _add_data(gen)
    _add_dro(gen)
    gen.add_argument('--t1', type=int, default=2)
    _add_attack(gen, 'attack-', DRO_ATTACK_METHODS)
    gen.add_argument('--attack-confidence', type=float, default=0.0)
    gen.add_argument('--out', required=True, help='robust dataset prefix')
    gen.add_argument('--final-model', default=None)

    robust_inputs = (('model', 'file'), ('robust', 'robust'))
    dro_train_parser = _command(dro_commands, 'train', cmd_dro_train,
                                robust_inputs)
    dro_train_parser.add_argument('--model', required=True)
    dro_train_parser.add_argument('--robust', required=True)
    _add_dro(dro_train_parser)
    dro_train_parser.add_argument('--t2', type=int, default=3)
    dro_train_parser.add_argument('--out', required=True)

    sample = _command(dro_commands, 'sample', cmd_dro_sample,
                      robust_inputs + (('images', 'file'),
                                       ('labels', 'file')))
    sample.add_argument('--model', required=True)
    sample.add_argument('--robust', required=True)
    _add_data(sample, required=False)
    _add_dro(sample)
    sample.add_argument('--t2', type=int, default=3)
    sample.add_argument('--runs', type=int, default=50)
    sample.add_argument('--out', required=True, help='population directory')

    fairness = commands.add_parser('fairness', help='group-fairness audit')
    fairness_commands = fairness.add_subparsers(dest='fairness_command',
                                                metavar='STAGE')
    fairness_commands.required = True

    grouped_inputs = (('data', 'grouped'), ('groups', 'file'))
    audit = _command(fairness_commands, 'audit', cmd_fairness_audit,
                     grouped_inputs + (('models', 'dir'),))
    audit.add_argument('--models', required=True)
    _add_grouped(audit)
    audit.add_argument('--out', required=True)

    compare = _command(fairness_commands, 'compare', cmd_fairness_compare,
                       grouped_inputs + (('a', 'dir'), ('b', 'dir')))
    compare.add_argument('--a', required=True)
    compare.add_argument('--b', required=True)
    _add_grouped(compare)
    compare.add_argument('--alternative', choices=('less', 'greater'),
                         default='less')
    compare.add_argument('--out', required=True)

    synth = _command(fairness_commands, 'synth', cmd_fairness_synth,
                     (('images', 'file'), ('labels', 'file')))
    _add_data(synth)
    synth.add_argument('--groups', type=int, required=True)
    synth.add_argument('--noise', type=float, required=True)
    synth.add_argument('--slope', type=float, default=1.0)
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--out', required=True)

    groups = _command(fairness_commands, 'groups', cmd_fairness_groups,
                      grouped_inputs + (('model', 'file'),))
    groups.add_argument('--model', required=True)
    _add_grouped(groups)
    groups.add_argument('--out', required=True)

    fit = _command(fairness_commands, 'fit', cmd_fairness_fit,
                   (('records', 'file'),))
    fit.add_argument('--records', required=True)
    fit.add_argument('--weighting', choices=WEIGHTINGS, default='sqrt')
    fit.add_argument('--out', required=True)

    synth_digits = _command(commands, 'synth-digits', cmd_synth_digits)
    synth_digits.add_argument('--count', type=int, default=1000)
    synth_digits.add_argument('--seed', type=int, default=0)
    synth_digits.add_argument('--size', type=int, default=16)
    synth_digits.add_argument('--noise', type=float, default=0.15)
    synth_digits.add_argument('--prototype-seed', type=int, default=0)
    synth_digits.add_argument('--out', required=True)
    return parser


def _missing_input(args):
    for name, kind in args.inputs:
        value = getattr(args, name, None)
        if value is None or not isinstance(value, str):
            continue
        if kind == 'file':
            paths = [value]
        elif kind == 'robust':
            paths = robust_dataset_paths(value)
        elif kind == 'grouped':
            paths = grouped_dataset_paths(value)
        else:
            if not os.path.isdir(value):
                return "--%s: '%s' is not a directory" % (name, value)
            continue
        for path in paths:
            if not os.path.isfile(path):
                return "--%s: '%s' does not exist" % (name, path)
    return None


def main(argv=None):
    """Run one command; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return error.code
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        problem = _missing_input(args)
        if problem:
            args.parser.error(problem)
        if args.workers is not None and args.workers < 1:
            args.parser.error("--workers must be positive")
        return args.handler(args)
    except SystemExit as error:
        return error.code
    except (PerceptualDroException, OSError) as error:
        logger.error("%s: %s", type(error).__name__, error)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
