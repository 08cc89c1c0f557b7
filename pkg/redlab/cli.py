"""
redlab command line.

One subcommand per experiment; each writes ``<out>/<command>.<format>`` and a
``<command>.manifest.json`` next to it.

Examples
--------
redlab nxor
redlab verify-theorem --trials 100 --seed 7
redlab measure-entropy --dataset mini --attack fgsm --out results
redlab snr-sweep --dataset data/t10k-images-idx3-ubyte --svg
"""
import argparse
import dataclasses
import json
import math
import pathlib
import sys
from typing import Dict, List, Optional, Sequence

from pydantic import ValidationError

import redlab
from redlab.config import Settings, load_settings
from redlab.dataio import JEncode, write_report
from redlab.exceptions import AcceptanceFailure, RedlabError, UsageError
from redlab.nxor import noisy_xor_points
from redlab.pipelines import EXPERIMENTS, PIPELINES, ROBUSTNESS_RATIOS, RunManifest, experiment_title
from redlab.plotting import write_svg
from redlab.utils import log as _log, set_log_level

log = _log.getChild('cli')

EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 1, 2

# command -> (x column, y column, grouping column or None, scatter)
PLOTS = {
    'train': ('epoch', 'train_accuracy', None, False),
    'quality-sweep': ('q', 'accuracy', None, False),
    'capacity': ('epsilon', 'min_params', 'variant', False),
    'snr-sweep': ('snr', 'accuracy', 'variant', False),
    'robustness-sweep': ('adv_accuracy', 'h_mle', None, True),
    'fitting-speed': ('epoch', 'train_accuracy', 'variant', False),
}

DATASET_COMMANDS = (
    'train',
    'attack',
    'measure-entropy',
    'complexity',
    'quality-sweep',
    'capacity',
    'snr-sweep',
    'robustness-sweep',
    'fitting-speed',
    'acceptance',
)
ATTACK_COMMANDS = ('attack', 'measure-entropy', 'complexity', 'capacity', 'snr-sweep', 'robustness-sweep', 'fitting-speed')


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f'{self.prog}: {message}')


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f'expected comma separated numbers, got {text!r}') from e


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f'expected comma separated integers, got {text!r}') from e


def _common(parser):
    parser.add_argument('--seed', type=int, help='master seed, default 0')
    parser.add_argument('--out', type=pathlib.Path, help='report directory')
    parser.add_argument('--format', choices=('csv', 'json'), default='csv')
    parser.add_argument('--config', type=pathlib.Path, help='JSON or YAML settings file')
    parser.add_argument('--log-level', choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))
    parser.add_argument('--check', action='store_true', help='exit 2 when a directional check fails')
    parser.add_argument('--svg', action='store_true', help='also write an SVG plot of the report')
    parser.add_argument('--epsilon', type=float, help='attack step / perturbation size')
    parser.add_argument('--budget-seconds', type=float)


def build_parser() -> Parser:
    parser = Parser(prog='redlab', description='feature redundancy and adversarial example experiments')
    parser.add_argument('--version', action='version', version=f'%(prog)s {redlab.__version__}')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=Parser)

    for name, experiment in EXPERIMENTS.items():
        p = sub.add_parser(name, help=experiment)
        _common(p)
        if name in DATASET_COMMANDS:
            p.add_argument('--dataset', default='mini', help='dataset path or "mini"')
        if name in ATTACK_COMMANDS:
            default = None if name == 'snr-sweep' else 'fgsm'
            p.add_argument('--attack', default=default, help='fgsm, deepfool or cw; comma separated for several')

    sub.choices['train'].add_argument('--model-out', type=pathlib.Path, help='write the trained model here')
    sub.choices['complexity'].add_argument('--dump-qtable', action='store_true')
    sub.choices['complexity'].add_argument('--quality', type=int)
    sub.choices['quality-sweep'].add_argument('--quality-list', type=_ints, default=[100, 75, 50, 20, 10, 1])
    sub.choices['capacity'].add_argument('--epsilon-list', type=_floats, default=[0.1])
    sub.choices['capacity'].add_argument('--linear', action='store_true', help='single softmax layer')
    sub.choices['capacity'].add_argument('--trials', type=int, help='random masks per size')
    sub.choices['nxor'].add_argument('--redundant-bits', type=int)
    sub.choices['nxor'].add_argument('--base-weights', type=_floats, help='9 numbers: h1 (a, b, t) h2 (c, d, t) out (o1, o2, t)')
    sub.choices['nxor'].add_argument('--plot', type=pathlib.Path, help='scatter of noisy points labelled x1 == x2')
    sub.choices['verify-theorem'].add_argument('--trials', type=int, default=100)
    sub.choices['verify-theorem'].add_argument('--system', type=pathlib.Path, help='JSON system document')
    sub.choices['snr-sweep'].add_argument('--snr-list', type=_floats, default=[math.inf, 10.0, 3.0, 1.0, 0.3, 0.1])
    sub.choices['robustness-sweep'].add_argument('--ratios', type=_floats, default=list(ROBUSTNESS_RATIOS))
    sub.choices['fitting-speed'].add_argument('--target', type=float, default=0.95)
    sub.choices['text-metrics'].add_argument('--pairs', type=pathlib.Path, required=True, help='TSV of benign/adversarial words')
    return parser


def resolve_settings(args) -> Settings:
    overrides = {
        'seed': args.seed,
        'out_dir': args.out,
        'log_level': args.log_level,
        'epsilon': args.epsilon,
        'budget_seconds': args.budget_seconds,
    }
    if args.command == 'capacity':
        overrides['trials_per_size'] = args.trials

    return load_settings(args.config, overrides)


def pipeline_kwargs(args, settings: Settings) -> Dict:
    kwargs = {'check': args.check}
    get = vars(args).get
    if get('dataset') is not None:
        kwargs['dataset'] = args.dataset
    if get('attack') is not None:
        kwargs['attack'] = args.attack

    command = args.command
    if command == 'train':
        kwargs['model_path'] = args.model_out
    elif command == 'attack':
        kwargs['out_dir'] = settings.out_dir
    elif command == 'complexity':
        kwargs.update(dump_qtable=args.dump_qtable, quality=args.quality)
    elif command == 'quality-sweep':
        kwargs['qualities'] = args.quality_list
    elif command == 'capacity':
        kwargs.update(epsilons=args.epsilon_list, linear=args.linear)
    elif command == 'nxor':
        kwargs.update(redundant_bits=args.redundant_bits, base_weights=args.base_weights)
    elif command == 'verify-theorem':
        kwargs.update(trials=args.trials, system_path=args.system)
    elif command == 'snr-sweep':
        kwargs['snrs'] = args.snr_list
    elif command == 'robustness-sweep':
        kwargs['ratios'] = args.ratios
    elif command == 'fitting-speed':
        kwargs['target'] = args.target
    elif command == 'text-metrics':
        kwargs['pairs_path'] = args.pairs

    return kwargs


def _plot_series(command: str, rows: Sequence[dict]):
    x, y, group, scatter = PLOTS[command]
    series: Dict[str, list] = {}
    for row in rows:
        key = str(row[group]) if group else EXPERIMENTS[command]
        series.setdefault(key, []).append((float(row[x]), float(row[y])))

    return series, dict(title=experiment_title(command), xlabel=x, ylabel=y, scatter=scatter)


def write_outputs(command: str, rows: List[dict], settings: Settings, fmt: str, manifest: RunManifest, svg=False):
    out_dir = pathlib.Path(settings.out_dir)
    path = write_report(
        rows,
        fmt,
        out_dir / f'{command}.{fmt}',
        columns=None if rows else ['empty'],
        experiment=experiment_title(command),
        manifest=manifest.reproducible() if fmt == 'json' else None,
    )
    # wall-clock fields stay out of the report so equal runs give equal bytes
    sidecar = out_dir / f'{command}.manifest.json'
    sidecar.write_text(json.dumps(dataclasses.asdict(manifest), cls=JEncode, indent=2) + '\n', encoding='utf-8')

    if svg and command in PLOTS and rows:
        series, kwargs = _plot_series(command, rows)
        write_svg(out_dir / f'{command}.svg', series, **kwargs)

    return path


def _nxor_plot(path: pathlib.Path, seed: int):
    points, labels = noisy_xor_points(200, seed=seed)
    write_svg(
        path,
        {'points': [tuple(p) for p in points]},
        title='x1 == x2',
        xlabel='x1',
        ylabel='x2',
        scatter=True,
        classes=list(labels),
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run one pipeline and return the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:
        # --help and --version
        return e.code if isinstance(e.code, int) else EXIT_OK

    try:
        settings = resolve_settings(args)
        set_log_level(settings.log_level)
        manifest = RunManifest.start(args.command, settings)
        rows = PIPELINES[args.command](settings=settings, manifest=manifest, **pipeline_kwargs(args, settings))
        if args.command == 'nxor' and args.plot is not None:
            _nxor_plot(args.plot, settings.seed)
        manifest.finish()
        path = write_outputs(args.command, rows, settings, args.format, manifest, svg=args.svg)
    except AcceptanceFailure as e:
        log.error(f'check failed: {e}')
        return EXIT_CHECK
    except (RedlabError, ValidationError) as e:
        log.error(f'{type(e).__name__}: {e}')
        return EXIT_INVALID
    except OSError as e:
        log.error(f'{e}')
        return EXIT_INVALID

    log.info(f'{args.command} done, report at {path}')
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == '__main__':
    main()
