"""
Command-line entry point.

Subcommands: train, eval, sigma, bounds, heatmap, synth.
Exit codes: 0 success, 2 configuration error, 3 data error,
4 numeric or artifact error.
"""
import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from kdn import __version__
from kdn.config import Config, configure_logging
from kdn.errors import ArtifactError, ConfigError, DataError, KdnError, NumericError, ReportVersionMismatch
from kdn.services import bounds, network, sigsel
from kdn.services.dataio import DataSet, load_csv, make_folds, make_synthetic, standardize, write_csv
from kdn.services.ism import IsmConfig
from kdn.services.kernelkit import build_gamma
from kdn.services.metrics import evaluate_model
from kdn.utils.csv_parser import FLOAT_FORMAT, write_matrix_csv
from kdn.utils.hashing import derive_seed
from kdn.utils.pgm import write_pgm
from kdn.utils.storage import dumps, ensure_dir, io_errors, write_text

logger = logging.getLogger(__name__)

REPORT_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

SYNTHETIC_PREFIX = 'synthetic:'


@dataclass(frozen=True)
class RunConfig:
    """Everything a train run needs; file values are overridden by flags."""
    data: str = ''
    label_col: str = 'label'
    folds: int = 10
    seed: int = Config.DEFAULT_SEED
    out: str = Config.OUTPUT_DIR
    jobs: int = Config.JOBS
    hsic_threshold: float = 0.99
    min_block_gap: float = 0.5
    gap_patience: int = 2
    max_layers: int = 10
    rff_width: int = Config.RFF_WIDTH
    sigma_strategy: str = 'grid_hsic_star'
    sigma_grid: Tuple[float, ...] = ()
    gamma_mode: str = 'centered'
    ism_tol: float = 1e-5
    ism_max_iters: int = 50
    rank_tol: float = 1e-5
    dump_spectra: bool = False

    def __post_init__(self):
        if not self.data:
            raise ConfigError("a data source is required (--data path.csv or synthetic:<name>)")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        # Validates the training fields early
        self.train_config(self.seed)

    def train_config(self, seed: int) -> network.TrainConfig:
        return network.TrainConfig(
            hsic_threshold=self.hsic_threshold,
            min_block_gap=self.min_block_gap,
            gap_patience=self.gap_patience,
            max_layers=self.max_layers,
            m_rff=self.rff_width,
            ism=IsmConfig(tol=self.ism_tol, max_iters=self.ism_max_iters, rank_tol=self.rank_tol),
            sigma_strategy=self.sigma_strategy,
            sigma_grid=self.sigma_grid,
            gamma_mode=self.gamma_mode,
            seed=seed,
        )

    @classmethod
    def from_file(cls, path: Path) -> Dict[str, Any]:
        """
        Read run settings from a JSON object or flat key=value lines.

        Args:
            path: Config file; '#' starts a comment in key=value files

        Returns:
            Field values keyed by RunConfig field name
        """
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e

        if text.lstrip().startswith('{'):
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON ({e})") from e
        else:
            raw = {}
            for number, line in enumerate(text.splitlines(), start=1):
                line = line.split('#', 1)[0].strip()
                if not line:
                    continue
                if '=' not in line:
                    raise ConfigError(f"{path}:{number}: expected key=value, got '{line}'")
                key, value = line.split('=', 1)
                raw[key.strip()] = value.strip()

        known = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for key, value in raw.items():
            name = key.replace('-', '_')
            if name not in known:
                raise ConfigError(f"{path}: unknown setting '{key}'")
            values[name] = _coerce(name, known[name].type, value)
        return values


def _coerce(name: str, kind: Any, value: Any) -> Any:
    try:
        if kind is bool:
            if isinstance(value, str):
                return value.strip().lower() in ('1', 'true', 'yes', 'on')
            return bool(value)
        if kind in (int, float, str):
            return kind(value)
        # sigma_grid
        if isinstance(value, str):
            return tuple(float(v) for v in value.split(',') if v.strip())
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value {value!r} for '{name}'") from e


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge the optional config file with command-line flags (flags win)."""
    values: Dict[str, Any] = {}
    if getattr(args, 'config', None):
        values.update(RunConfig.from_file(Path(args.config)))

    for f in dataclasses.fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is None or flag is False:
            continue
        values[f.name] = _coerce(f.name, f.type, flag)
    try:
        return RunConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e


# ============== Helpers ==============

def load_source(source: str, label_col: str, seed: int = 0, n: Optional[int] = None) -> DataSet:
    """DataSet from a CSV path or 'synthetic:<name>'."""
    if source.startswith(SYNTHETIC_PREFIX):
        name = source[len(SYNTHETIC_PREFIX):]
        try:
            return make_synthetic(name, n=n, seed=seed)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    path = Path(source)
    if not path.is_file():
        raise DataError(f"data file {path} does not exist")
    return load_csv(path, int(label_col) if label_col.isdigit() else label_col)


def _model_inputs(model: network.NetworkModel, ds: DataSet) -> Tuple[np.ndarray, np.ndarray]:
    """Standardized features and model-side labels for a dataset scored by a saved model."""
    X = model.standardizer.apply(ds.features) if model.standardizer else ds.features
    lookup = {name: index for index, name in enumerate(model.class_names)}
    unknown = sorted(set(ds.class_names) - set(lookup))
    if unknown:
        raise DataError(f"classes {unknown} were not seen in training")
    labels = np.array([lookup[ds.class_names[c]] for c in ds.labels], dtype=np.int64)
    return X, labels


def _finite(value: float) -> float:
    return value if np.isfinite(value) else sys.float_info.max


def _mean_std(values: Sequence[float]) -> Dict[str, float]:
    """Mean and std; sentinel values (float max) stay finite in the report."""
    arr = np.asarray(values, dtype=np.float64)
    with np.errstate(over='ignore', invalid='ignore'):
        return {'mean': _finite(float(arr.mean())), 'std': _finite(float(arr.std()))}


def parse_log_grid(text: str) -> np.ndarray:
    """'a:b:n' -> n log-spaced values from a to b."""
    try:
        lo, hi, count = text.split(':')
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError as e:
        raise ConfigError(f"grid must look like a:b:n, got '{text}'") from e
    if not (0 < lo and 0 < hi and count >= 1):
        raise ConfigError(f"grid bounds must be positive and n >= 1, got '{text}'")
    return np.geomspace(lo, hi, count)


def load_report(path: Path) -> Dict[str, Any]:
    """Read a report.json, rejecting unknown schema versions."""
    with io_errors(path, 'read'), open(path, 'r') as f:
        report = json.load(f)
    version = report.get('schema_version')
    if version != REPORT_VERSION:
        raise ReportVersionMismatch(f"{path}: report schema_version {version!r}, expected {REPORT_VERSION}")
    return report


# ============== Commands ==============

def _run_fold(ds: DataSet, plan, fold: int, cfg: RunConfig, out_dir: Path) -> Dict[str, Any]:
    train_idx, test_idx = plan.split(fold)
    train_ds, transform = standardize(ds.subset(train_idx))
    test_X = transform.apply(ds.features[test_idx])
    test_y = ds.labels[test_idx]

    fold_seed = derive_seed(cfg.seed, 'fold', fold)
    model = network.train(train_ds, cfg.train_config(fold_seed), transform)
    metrics = evaluate_model(model, train_ds.features, train_ds.labels, test_X, test_y)

    model_dir = out_dir / f'fold_{fold:02d}'
    network.save(model, model_dir)
    if cfg.dump_spectra:
        for index, layer in enumerate(model.layers, start=1):
            spectra_path = model_dir / f'layer_{index:02d}' / 'spectra.csv'
            with io_errors(spectra_path):
                write_matrix_csv(spectra_path, np.vstack(layer.spectra))

    logger.info("Fold %d: depth=%d, train=%.3f, test=%.3f, HSIC*=%.4f",
                fold, model.depth, metrics.train_acc, metrics.test_acc or 0.0, metrics.hsic_star)
    return {
        'fold': fold,
        'train_acc': metrics.train_acc,
        'test_acc': metrics.test_acc,
        'hsic_star': metrics.hsic_star,
        'csr': metrics.csr,
        'scatter_ratio': metrics.scatter_ratio,
        'silhouette': metrics.silhouette,
        'depth': model.depth,
        'smallest_sigma': model.smallest_sigma,
        'sigmas': [layer.sigma for layer in model.layers],
        'dims': [f"({layer.m_in}, {layer.q})" for layer in model.layers],
        'hsic_sequence': model.hsic_sequence,
        'monotone': model.monotone,
        'converged': model.converged,
        'per_layer': [dataclasses.asdict(m) for m in metrics.per_layer],
    }


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_run_config(args)
    ds = load_source(cfg.data, cfg.label_col, cfg.seed)
    plan = make_folds(ds, cfg.folds, cfg.seed)

    out_dir = ensure_dir(Path(cfg.out))

    folds = range(plan.k)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as executor:
            results = list(executor.map(lambda i: _run_fold(ds, plan, i, cfg, out_dir), folds))
    else:
        results = [_run_fold(ds, plan, i, cfg, out_dir) for i in folds]

    config = dataclasses.asdict(cfg)
    for key in ('out', 'jobs'):
        config.pop(key)
    config['sigma_grid'] = list(cfg.sigma_grid)

    report = {
        'schema_version': REPORT_VERSION,
        'command': 'train',
        'config': config,
        'dataset': {'n': ds.n, 'd': ds.d, 'classes': list(ds.class_names)},
        'summary': {
            key: _mean_std([r[key] for r in results])
            for key in ('train_acc', 'test_acc', 'hsic_star', 'csr', 'depth', 'smallest_sigma')
        },
        'monotone_folds': sum(1 for r in results if r['monotone']),
        'converged_folds': sum(1 for r in results if r['converged']),
        'folds': results,
    }
    report_path = out_dir / 'report.json'
    write_text(report_path, dumps(report))
    logger.info("Wrote %s", report_path)

    summary = report['summary']
    print(f"train {summary['train_acc']['mean']:.3f} ± {summary['train_acc']['std']:.3f}, "
          f"test {summary['test_acc']['mean']:.3f} ± {summary['test_acc']['std']:.3f}, "
          f"HSIC* {summary['hsic_star']['mean']:.3f}, depth {summary['depth']['mean']:.1f}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    ds = load_source(args.data, args.label_col)
    model = network.load(Path(args.model))
    X, labels = _model_inputs(model, ds)

    metrics = evaluate_model(model, X, labels)
    result = {
        'schema_version': REPORT_VERSION,
        'command': 'eval',
        'accuracy': metrics.train_acc,
        'metrics': metrics.to_dict(),
    }
    text = dumps(result)
    if args.out:
        write_text(Path(args.out), text)
    print(text, end='')
    return EXIT_OK


def cmd_sigma(args: argparse.Namespace) -> int:
    ds = load_source(args.data, args.label_col, args.seed)
    train_ds, _ = standardize(ds)

    separation = sigsel.sigma_by_separation(train_ds.features, train_ds.labels)
    grid = sigsel.sigma_by_hsic_grid(train_ds.features, build_gamma(train_ds.labels))

    out_dir = ensure_dir(Path(args.out))
    for name, result in (('sigma_separation.csv', separation), ('sigma_hsic.csv', grid)):
        with io_errors(out_dir / name):
            pd.DataFrame(result.objective_curve, columns=['sigma', 'value']).to_csv(
                out_dir / name, index=False, float_format=FLOAT_FORMAT)

    summary = {
        'max_separation': separation.sigma,
        'grid_hsic_star': grid.sigma,
        'ratio': separation.sigma / grid.sigma,
    }
    print(dumps(summary), end='')
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    try:
        counts = [int(c) for c in args.counts.split(',')]
        profile = bounds.ClassProfile.from_counts(counts, args.gamma_mode)
    except ValueError as e:
        raise ConfigError(f"invalid --counts '{args.counts}': {e}") from e

    rows = bounds.bound_table(profile, parse_log_grid(args.sigma0_grid), args.sigma1, args.min_sq_dist, args.zeta)
    frame = pd.DataFrame(
        [(r.sigma0, r.sigma1, r.ub, r.L, r.L_star, r.H_star) for r in rows],
        columns=['sigma0', 'sigma1', 'ub', 'L', 'L_star', 'H_star'],
    )
    if args.out:
        with io_errors(args.out):
            frame.to_csv(args.out, index=False, float_format=FLOAT_FORMAT)
        logger.info("Wrote %s", args.out)
    else:
        print(frame.to_csv(index=False, float_format=FLOAT_FORMAT), end='')
    return EXIT_OK


def cmd_heatmap(args: argparse.Namespace) -> int:
    ds = load_source(args.data, args.label_col)
    model = network.load(Path(args.model))
    if not 0 <= args.layer <= model.depth:
        raise ConfigError(f"--layer must be in [0, {model.depth}], got {args.layer}")

    X, labels = _model_inputs(model, ds)
    order = np.argsort(labels, kind='stable')
    kernels = network.kernel_sequence(model, X[order])
    with io_errors(args.out):
        write_pgm(Path(args.out), kernels[args.layer].values)
    logger.info("Wrote %s", args.out)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        ds = make_synthetic(args.name, n=args.n, seed=args.seed, noise=args.noise)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    with io_errors(args.out):
        write_csv(ds, Path(args.out))
    logger.info("Wrote %d rows to %s", ds.n, args.out)
    return EXIT_OK


# ============== Parser ==============

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='kdn', description="Kernel dependence networks trained layer by layer")
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='store_true', help="debug logging")
    sub = parser.add_subparsers(dest='command', required=True)

    train = sub.add_parser('train', help="k-fold training run")
    train.add_argument('--data', help="CSV path or synthetic:<spiral|random|adversarial>")
    train.add_argument('--label-col', dest='label_col')
    train.add_argument('--folds', type=int)
    train.add_argument('--seed', type=int)
    train.add_argument('--out')
    train.add_argument('--config', help="JSON or key=value settings file")
    train.add_argument('--jobs', type=int)
    train.add_argument('--hsic-threshold', dest='hsic_threshold', type=float)
    train.add_argument('--min-block-gap', dest='min_block_gap', type=float,
                       help="block gap the last layer's kernel must reach before training stops")
    train.add_argument('--gap-patience', dest='gap_patience', type=int,
                       help="extra layers allowed after the HSIC* threshold to reach the block gap")
    train.add_argument('--max-layers', dest='max_layers', type=int)
    train.add_argument('--rff-width', dest='rff_width', type=int)
    train.add_argument('--sigma-strategy', dest='sigma_strategy', choices=sigsel.STRATEGIES)
    train.add_argument('--sigma-grid', dest='sigma_grid', help="comma-separated sigmas")
    train.add_argument('--gamma-mode', dest='gamma_mode', choices=('centered', 'signed'))
    train.add_argument('--dump-spectra', dest='dump_spectra', action='store_true')
    train.set_defaults(handler=cmd_train)

    evaluate = sub.add_parser('eval', help="score a saved model on a dataset")
    evaluate.add_argument('--model', required=True)
    evaluate.add_argument('--data', required=True)
    evaluate.add_argument('--label-col', dest='label_col', default='label')
    evaluate.add_argument('--out')
    evaluate.set_defaults(handler=cmd_eval)

    sigma = sub.add_parser('sigma', help="bandwidth objective curves for the input layer")
    sigma.add_argument('--data', required=True)
    sigma.add_argument('--label-col', dest='label_col', default='label')
    sigma.add_argument('--seed', type=int, default=Config.DEFAULT_SEED)
    sigma.add_argument('--out', default=Config.OUTPUT_DIR)
    sigma.set_defaults(handler=cmd_sigma)

    bound = sub.add_parser('bounds', help="lower-bound table over a sigma0 grid")
    bound.add_argument('--counts', required=True, help="class sizes, e.g. 5,5")
    bound.add_argument('--sigma1', type=float, required=True)
    bound.add_argument('--sigma0-grid', dest='sigma0_grid', default='1e-3:1:50', help="a:b:n, log-spaced")
    bound.add_argument('--min-sq-dist', dest='min_sq_dist', type=float, default=1.0)
    bound.add_argument('--zeta', type=float, default=1.0)
    bound.add_argument('--gamma-mode', dest='gamma_mode', choices=('centered', 'signed'), default='signed')
    bound.add_argument('--out')
    bound.set_defaults(handler=cmd_bounds)

    heatmap = sub.add_parser('heatmap', help="kernel matrix of one layer as a PGM image")
    heatmap.add_argument('--model', required=True)
    heatmap.add_argument('--data', required=True)
    heatmap.add_argument('--label-col', dest='label_col', default='label')
    heatmap.add_argument('--layer', type=int, required=True)
    heatmap.add_argument('--out', required=True)
    heatmap.set_defaults(handler=cmd_heatmap)

    synth = sub.add_parser('synth', help="write a synthetic dataset as CSV")
    synth.add_argument('--name', required=True, choices=('spiral', 'random', 'adversarial'))
    synth.add_argument('--n', type=int)
    synth.add_argument('--seed', type=int, default=Config.DEFAULT_SEED)
    synth.add_argument('--noise', type=float)
    synth.add_argument('--out', required=True)
    synth.set_defaults(handler=cmd_synth)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging('debug' if args.verbose else None)

    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, ArtifactError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except KdnError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == '__main__':
    sys.exit(main())
