#!/usr/bin/env python3
"""
Benchmark run: k-fold training on the synthetic datasets (plus any CSV
files given on the command line) with a summary table and the layer-trend
checks.

Usage:
    python3 scripts/run_benchmarks.py [--folds 10] [--seed 1] [--tiny-sigma] [data.csv:label ...]

With --tiny-sigma the run ends with two fixed layers at sigma=1e-5 on the
random and adversarial sets, which memorize the training points while
HSIC* stays low.
"""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from kdn.config import configure_logging
from kdn.services import network
from kdn.services.dataio import load_csv, make_folds, make_synthetic, standardize
from kdn.services.metrics import evaluate_model
from kdn.utils.hashing import derive_seed

parser = argparse.ArgumentParser(description="k-fold benchmark over synthetic and CSV datasets")
parser.add_argument('--folds', type=int, default=10)
parser.add_argument('--seed', type=int, default=1)
parser.add_argument('--log', default='warning')
parser.add_argument('--tiny-sigma', action='store_true', help="also run the fixed sigma=1e-5 two-layer setting")
parser.add_argument('datasets', nargs='*', help="extra CSV files as path[:label_column]")
args = parser.parse_args()

configure_logging(args.log)

datasets = [(name, make_synthetic(name, seed=args.seed)) for name in ('spiral', 'random', 'adversarial')]
for entry in args.datasets:
    path, _, label = entry.partition(':')
    datasets.append((Path(path).stem, load_csv(Path(path), label or 'label')))

print("=" * 70)
print(f"Benchmark: {len(datasets)} datasets, {args.folds} folds, seed {args.seed}")
print("=" * 70)
print()

rows = []
for name, ds in datasets:
    print(f"[{name}] n={ds.n}, d={ds.d}, classes={ds.n_classes}")
    started = time.time()
    plan = make_folds(ds, args.folds, args.seed)

    train_acc, test_acc, hsic, depth = [], [], [], []
    monotone, converged, trend = 0, 0, 0
    for fold, (train_idx, test_idx) in enumerate(plan):
        train_ds, transform = standardize(ds.subset(train_idx))
        cfg = network.TrainConfig(seed=derive_seed(args.seed, 'fold', fold))
        model = network.train(train_ds, cfg, transform)
        report = evaluate_model(model, train_ds.features, train_ds.labels,
                                transform.apply(ds.features[test_idx]), ds.labels[test_idx])

        train_acc.append(report.train_acc)
        test_acc.append(report.test_acc)
        hsic.append(report.hsic_star)
        depth.append(model.depth)
        monotone += model.monotone
        converged += model.converged

        first, last = report.per_layer[0], report.per_layer[-1]
        if last.scatter_ratio <= first.scatter_ratio and last.block_gap >= 0.5:
            trend += 1

    elapsed = time.time() - started
    print(f"  train {np.mean(train_acc):.3f} ± {np.std(train_acc):.3f}, "
          f"test {np.mean(test_acc):.3f} ± {np.std(test_acc):.3f}, "
          f"HSIC* {np.mean(hsic):.3f}, depth {np.mean(depth):.1f}, {elapsed:.1f}s")

    status = "✅" if monotone == args.folds else "⚠️ "
    print(f"  {status} monotone HSIC* sequence in {monotone}/{args.folds} folds")
    status = "✅" if converged == args.folds else "⚠️ "
    print(f"  {status} HSIC* threshold and block gap reached in {converged}/{args.folds} folds")
    status = "✅" if trend == args.folds else "⚠️ "
    print(f"  {status} scatter ratio shrank with block gap >= 0.5 in {trend}/{args.folds} folds")
    print()
    rows.append((name, np.mean(train_acc), np.mean(test_acc), np.mean(hsic), np.mean(depth)))

print("=" * 70)
print(f"{'dataset':<16}{'train':>10}{'test':>10}{'HSIC*':>10}{'depth':>10}")
for name, tr, te, h, d in rows:
    print(f"{name:<16}{tr:>10.3f}{te:>10.3f}{h:>10.3f}{d:>10.1f}")
print("=" * 70)

if args.tiny_sigma:
    print()
    print("Fixed sigma=1e-5, two layers")
    print("-" * 70)
    tiny = network.TrainConfig(sigma_strategy='fixed', sigma_grid=(1e-5,), max_layers=2)
    for name in ('random', 'adversarial'):
        ds, _ = standardize(make_synthetic(name, seed=args.seed))
        model = network.train(ds, tiny)
        report = evaluate_model(model, ds.features, ds.labels)
        print(f"{name:<16}train {report.train_acc:.3f}, HSIC* {report.hsic_star:.3f}, depth {model.depth}")
