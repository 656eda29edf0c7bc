"""Command-line driver: simulate / fit / diagnose / metrics / sweep.

Event files are headerless CSV rows ``type_index(1-based),timestamp``; lines
starting with '#' are skipped (output files carry a comment line embedding
the effective config hash and seed). Exit codes: 0 success, 2 validation or
parse failure, 3 numerical failure.
"""

import argparse
import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics
from .config import load_config, read_params_file, write_params_file
from .exceptions import NumericalError, ParseError, ValidationError
from .paths import EventPath
from .simulate import simulate_cluster
from .solver import fit


def ingest_events(file, d, time_scale=1.0, horizon=None, warn=None):
    """Read an event CSV into an EventPath.

    Cross-type timestamp collisions keep the record that appears first in the
    file (a warning is emitted); within-type duplicates are rejected. Records
    past the configured horizon are dropped.
    """
    warn = warn or (lambda msg: print(msg, file=sys.stderr))
    streams = [[] for _ in range(d)]
    seen = {}
    comment_horizon = None
    with open(file, newline="") as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                # writers stamp 'horizon=...' into the leading comment so a
                # serialize/ingest round trip preserves the observation window
                for token in " ".join(row).split():
                    if token.startswith("horizon="):
                        comment_horizon = float(token.split("=", 1)[1])
                continue
            if len(row) != 2:
                raise ParseError(f"expected 'type,timestamp', got {row!r}", line=line_no)
            try:
                type_idx = int(row[0])
                stamp = float(row[1]) * time_scale
            except ValueError:
                raise ParseError(f"cannot parse record {row!r}", line=line_no) from None
            if not 1 <= type_idx <= d:
                raise ParseError(f"type index {type_idx} outside [1, {d}]", line=line_no)
            if horizon is not None and stamp > horizon:
                continue
            prior = seen.get(stamp)
            if prior is not None:
                if prior != type_idx:
                    warn(f"line {line_no}: timestamp {stamp!r} collides across types; keeping first record")
                    continue
                raise ValidationError(
                    f"line {line_no}: duplicate timestamp {stamp!r} within type {type_idx}"
                )
            seen[stamp] = type_idx
            streams[type_idx - 1].append(stamp)
    arrays = [np.sort(np.asarray(s, dtype=float)) for s in streams]
    if horizon is None:
        horizon = comment_horizon
    if horizon is None:
        horizon = max((a[-1] for a in arrays if a.size), default=0.0)
    for i, arr in enumerate(arrays):
        if arr.size == 0:
            raise ValidationError(f"event stream for type {i + 1} is empty")
    return EventPath(arrays, horizon=horizon)


def write_events(file, path, header_comment=None):
    """Serialize an EventPath to the event CSV format (merged, time ordered)."""
    records = []
    for i, arr in enumerate(path.times):
        records.extend((t, i + 1) for t in arr)
    records.sort()
    with open(file, "w", newline="") as handle:
        if header_comment:
            handle.write(f"# {header_comment}\n")
        writer = csv.writer(handle)
        for stamp, type_idx in records:
            writer.writerow([type_idx, repr(float(stamp))])  # repr round-trips float64 exactly


def _stamp(cfg, seed=None):
    return f"config_hash={cfg.digest()} seed={cfg.solver.seed if seed is None else seed}"


def _load_path(cfg, args, seed):
    """Events from --events / [ingest], else a fresh simulation."""
    events_file = args.events or cfg.ingest.events
    if events_file:
        return ingest_events(
            events_file, cfg.model.d, time_scale=cfg.ingest.time_scale, horizon=cfg.ingest.horizon
        )
    gt = cfg.simulate.ground_truth(cfg.model)
    return simulate_cluster(gt, cfg.simulate.horizon, seed=seed)


def cmd_simulate(cfg, args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gt = cfg.simulate.ground_truth(cfg.model)
    for p in range(cfg.simulate.n_paths):
        path = simulate_cluster(gt, cfg.simulate.horizon, seed=cfg.solver.seed + p)
        name = "events.csv" if cfg.simulate.n_paths == 1 else f"events_{p + 1:03d}.csv"
        comment = f"{_stamp(cfg, cfg.solver.seed + p)} horizon={path.horizon!r}"
        write_events(out / name, path, header_comment=comment)
        print(f"wrote {out / name} ({path.total_events} events)")
    return 0


def _write_csv(file, header_comment, columns, rows):
    with open(file, "w", newline="") as handle:
        handle.write(f"# {header_comment}\n")
        writer = csv.writer(handle)
        writer.writerow(columns)
        writer.writerows(rows)


def _fit_one(cfg, path):
    model = cfg.model.build()
    record = fit(path, model, solver_cfg=cfg.solver, strata_cfg=cfg.strata)
    if any(record.diverged):
        raise NumericalError("; ".join(record.messages) or "fit diverged",
                             payload={"messages": record.messages})
    return model, record


def _write_diagnostics(out, stamp, path, model, theta):
    res = diagnostics.residuals(path, model, theta)
    gof_lines = []
    for k in range(model.d):
        theo, emp = diagnostics.qq_series(res.residuals[k])
        _write_csv(out / f"qq_dim{k + 1}.csv", stamp,
                   ["theoretical_quantile", "empirical_quantile"], np.column_stack([theo, emp]))
        pos, series, band = diagnostics.bridge_series(res.uniforms[k])
        rows = np.column_stack([np.arange(1, len(series) + 1), series,
                                np.full_like(series, -band), np.full_like(series, band)])
        _write_csv(out / f"bridge_dim{k + 1}.csv", stamp,
                   ["index", "bridge_value", "band_lo", "band_hi"], rows)
        d_stat, p_val, crit = diagnostics.ks_statistic(res.uniforms[k])
        gof_lines.append(
            f"dim {k + 1}: ks_stat={d_stat:.6g} p_value={p_val:.6g} crit_99={crit:.6g} "
            f"{'PASS' if d_stat < crit else 'REJECT'} at 1%"
        )
    (out / "gof.txt").write_text(f"# {stamp}\n" + "\n".join(gof_lines) + "\n")
    return gof_lines


def _write_metrics(out, stamp, gt, model, theta):
    report = diagnostics.metric_report(gt, model, theta)
    lines = [f"# {stamp}", f"l2_rel_err = {report.l2_rel_err:.10g}", f"wass_err = {report.wass_err:.10g}"]
    for k in range(model.d):
        for i in range(model.d):
            lines.append(
                f"kernel_{k + 1}_{i + 1}: l2_sq_dist = {report.l2_kernel_terms[k, i]:.10g} "
                f"wass = {report.wass_kernel_terms[k, i]:.10g}"
            )
    (out / "metrics.txt").write_text("\n".join(lines) + "\n")
    return report.l2_rel_err, report.wass_err


def cmd_fit(cfg, args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(cfg)
    path = _load_path(cfg, args, cfg.solver.seed)
    model, record = _fit_one(cfg, path)
    write_params_file(
        out / "params.txt", model, record.theta,
        meta={"config_hash": cfg.digest(), "seed": cfg.solver.seed, "horizon": path.horizon},
    )
    # per-iteration trajectory: parameters then gradient components per dim
    for k in range(model.d):
        names = model.param_names_k(k)
        theta_path = record.theta_paths[k]
        grad_path = record.grad_paths[k]
        rows = []
        for it in range(theta_path.shape[0]):
            grad_row = grad_path[it - 1] if 0 < it <= grad_path.shape[0] else np.zeros(len(names))
            rows.append([it, *theta_path[it], *grad_row])
        _write_csv(out / f"trajectory_dim{k + 1}.csv", stamp,
                   ["iteration", *names, *[f"grad.{n}" for n in names]], rows)
    _write_diagnostics(out, stamp, path, model, record.theta)
    if cfg.simulate.mu is not None:
        gt = cfg.simulate.ground_truth(cfg.model)
        _write_metrics(out, stamp, gt, model, record.theta)
    (out / "config_effective.ini").write_text(f"# {stamp}\n" + cfg.effective_text())
    print(f"fit complete: {out / 'params.txt'}")
    return 0


def cmd_diagnose(cfg, args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, theta, meta = read_params_file(args.params)
    stamp = f"config_hash={meta.get('config_hash', 'none')} seed={meta.get('seed', 'none')}"
    path = ingest_events(args.events, model.d, time_scale=cfg.ingest.time_scale,
                         horizon=cfg.ingest.horizon)
    for line in _write_diagnostics(out, stamp, path, model, theta):
        print(line)
    return 0


def cmd_metrics(cfg, args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, theta, meta = read_params_file(args.params)
    gt = cfg.simulate.ground_truth(cfg.model)
    l2, w1 = _write_metrics(out, _stamp(cfg), gt, model, theta)
    print(f"l2_rel_err = {l2:.10g}\nwass_err = {w1:.10g}")
    return 0


def cmd_sweep(cfg, args):
    """Simulate n_paths, truncate each at every horizon, fit, aggregate metrics."""
    if not cfg.sweep_horizons:
        raise ValidationError("sweep requires a [sweep] section with horizons")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gt = cfg.simulate.ground_truth(cfg.model)
    full_horizon = max(max(cfg.sweep_horizons), cfg.simulate.horizon)
    paths = [
        simulate_cluster(gt, full_horizon, seed=cfg.solver.seed + p)
        for p in range(cfg.simulate.n_paths)
    ]

    def fit_cell(cell):
        p, horizon = cell
        src = paths[p]
        truncated = EventPath([t[t <= horizon] for t in src.times], horizon=horizon)
        model, record = _fit_one(cfg, truncated)
        l2 = diagnostics.l2_rel_err(gt, model, record.theta)
        w1 = diagnostics.wass_err(gt, model, record.theta)
        return horizon, truncated.total_events, l2, w1

    cells = [(p, h) for h in cfg.sweep_horizons for p in range(len(paths))]
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(fit_cell, cells))
    else:
        results = [fit_cell(c) for c in cells]
    rows = []
    for horizon in cfg.sweep_horizons:
        got = [r for r in results if r[0] == horizon]
        n_mean = float(np.mean([r[1] for r in got]))
        l2s = np.array([r[2] for r in got])
        w1s = np.array([r[3] for r in got])
        rows.append([
            horizon, n_mean,
            l2s.mean(), np.percentile(l2s, 25), np.percentile(l2s, 75),
            w1s.mean(), np.percentile(w1s, 25), np.percentile(w1s, 75),
        ])
    _write_csv(out / "sweep.csv", _stamp(cfg),
               ["horizon", "n_events_mean", "l2_rel_err_mean", "l2_rel_err_q25", "l2_rel_err_q75",
                "wass_err_mean", "wass_err_q25", "wass_err_q75"], rows)
    print(f"wrote {out / 'sweep.csv'}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "diagnose": cmd_diagnose,
    "metrics": cmd_metrics,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="hawkes-sgd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override [solver] seed")
        p.add_argument("--events", default=None, help="event CSV (overrides [ingest])")
        p.add_argument("--threads", type=int, default=1, help="parallel sweep cells")
        if name in ("diagnose", "metrics"):
            p.add_argument("--params", required=True, help="fitted-parameters file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.solver.seed = args.seed
        return _COMMANDS[args.command](cfg, args)
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc} {exc.payload}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
