"""Command-line entry point: generate streams, run the adaptive model,
benchmark presets, and estimate connectivity networks.

Commands and file formats
-------------------------
simulate  writes ``t,regime,y,x1..xp[,b1..bp]`` (b-columns are the generating
          coefficients, omitted with --no-truth).
run       consumes that schema (t, regime and b-columns optional) and writes
          one row per observation, ``t,lambda,lookahead_loss,active_size
          [,f_score]``, followed by a ``#``-prefixed summary footer.
bench     writes a per-arm summary table plus per-replication traces.
network   regresses every column on all others, each with its own adaptive
          penalty, and writes ``t,i,j,weight`` edge rows (1-based node ids)
          at every checkpoint stride, plus per-node penalty traces.

All floats are written with 9 significant digits; commands are deterministic
given identical flags and seed.  Unless --no-figures is passed, report
commands also render a PNG next to the delimited output.

Exit codes: 0 success, 2 usage or configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import bench, plots, simgen
from .rap import RapRunner

USAGE_ERROR = 2
DATA_ERROR = 3


class UsageError(Exception):
    code = USAGE_ERROR


class DataError(Exception):
    code = DATA_ERROR


def _fmt(x) -> str:
    return format(float(x), ".9g")


def _write_rows(path, header, rows, footer=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        for key, val in footer:
            fh.write(f"# {key},{val}\n")


def _read_table(path):
    """Read a CSV into (header, float matrix); names the offending cell on error."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = [row for row in reader if row and not row[0].startswith("#")]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    header = [h.strip() for h in header]
    data = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 1} has {len(row)} fields, "
                            f"expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i + 1}, column {header[j]!r}: "
                                f"not a number: {cell!r}") from None
            if not np.isfinite(v):
                raise DataError(f"{path}: row {i + 1}, column {header[j]!r}: "
                                f"non-finite value")
            data[i, j] = v
    return header, data


def _figure_path(out_path) -> Path:
    out = Path(out_path)
    return out.with_suffix(".png") if out.suffix else out.parent / (out.name + ".png")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _parse_regimes(text, p, family):
    specs = []
    for part in text.split(","):
        try:
            rho_s, dur_s = part.split(":")
            rho, dur = float(rho_s), int(dur_s)
        except ValueError:
            raise UsageError(f"bad --regimes entry {part!r}; expected rho:duration")
        specs.append(simgen.RegimeSpec(p=p, rho=rho, duration=dur, family=family))
    return specs


def cmd_simulate(args) -> int:
    if args.preset == "table1":
        p = 20
        specs = [simgen.RegimeSpec(p=p, rho=rho, duration=100, family=args.family)
                 for rho in (0.8, 0.2, 0.8)]
    elif args.regimes:
        p = args.p
        specs = _parse_regimes(args.regimes, p, args.family)
    else:
        p = args.p
        specs = [simgen.RegimeSpec(p=p, rho=args.rho, duration=args.duration,
                                   family=args.family, n_blocks=args.blocks,
                                   block_corr=args.block_corr)]
    rng = np.random.default_rng(args.seed)
    stream = simgen.make_piecewise_stream(specs, rng)

    header = ["t", "regime", "y"] + [f"x{j}" for j in range(1, p + 1)]
    if not args.no_truth:
        header += [f"b{j}" for j in range(1, p + 1)]
    rows = []
    for t, s in enumerate(stream, start=1):
        row = [str(t), str(s.regime_id), _fmt(s.y)] + [_fmt(v) for v in s.x]
        if not args.no_truth:
            row += [_fmt(v) for v in s.true_beta]
        rows.append(row)
    _write_rows(args.out, header, rows)
    print(f"wrote {len(rows)} observations to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _stream_columns(header, path):
    """Locate y, x1..xp and optional b1..bp columns in a run input table."""
    cols = {name: idx for idx, name in enumerate(header)}
    if "y" not in cols:
        raise DataError(f"{path}: required column 'y' is missing")
    x_idx = []
    j = 1
    while f"x{j}" in cols:
        x_idx.append(cols[f"x{j}"])
        j += 1
    if not x_idx:
        raise DataError(f"{path}: no predictor columns x1..xp found")
    p = len(x_idx)
    stray = [name for name in cols if name.startswith("x")
             and name[1:].isdigit() and int(name[1:]) > p]
    if stray:
        raise DataError(f"{path}: predictor columns are not contiguous; "
                        f"unexpected column {stray[0]!r}")
    b_idx = None
    if "b1" in cols:
        b_idx = []
        for k in range(1, p + 1):
            if f"b{k}" not in cols:
                raise DataError(f"{path}: truth column 'b{k}' is missing "
                                f"(found b1 but not all of b1..b{p})")
            b_idx.append(cols[f"b{k}"])
    return cols["y"], x_idx, b_idx


def cmd_run(args) -> int:
    header, data = _read_table(args.input)
    y_col, x_idx, b_idx = _stream_columns(header, args.input)
    if data.shape[0] == 0:
        raise DataError(f"{args.input}: no data rows")
    p = len(x_idx)

    runner = RapRunner(p, family=args.family, r=args.r, epsilon=args.epsilon,
                       lambda0=args.lambda0, mode=args.mode)
    records = []
    for i in range(data.shape[0]):
        x = data[i, x_idx]
        y = data[i, y_col]
        truth = np.flatnonzero(data[i, b_idx]) if b_idx is not None else None
        try:
            records.append(runner.step(x, y, true_support=truth))
        except ValueError as exc:
            raise DataError(f"{args.input}: row {i + 1}: {exc}") from None

    with_f = b_idx is not None
    out_header = ["t", "lambda", "lookahead_loss", "active_size"]
    if with_f:
        out_header.append("f_score")
    rows = []
    for rec in records:
        row = [str(rec.t), _fmt(rec.lam), _fmt(rec.lookahead_loss),
               str(rec.active_size)]
        if with_f:
            row.append(_fmt(rec.f_score))
        rows.append(row)
    footer = [("mean_lookahead_loss", _fmt(bench.mean_lookahead(records)))]
    if with_f:
        footer.append(("mean_f_score", _fmt(bench.mean_f(records))))
    _write_rows(args.out, out_header, rows, footer)

    if not args.no_figures:
        plots.plot_trace(records, _figure_path(args.out),
                         title=f"{args.family} stream, mode={args.mode}")
    print(f"processed {len(records)} observations; "
          f"mean look-ahead loss {_fmt(bench.mean_lookahead(records))}")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def cmd_bench(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kwargs = dict(preset=args.preset, family=args.family, seed=args.seed)
    if args.r is not None:
        kwargs["r"] = args.r
    if args.epsilon is not None:
        kwargs["epsilon"] = args.epsilon
    if args.preset == "stationary" and args.p:
        kwargs["p_values"] = tuple(int(v) for v in args.p.split(","))
    try:
        cfg = bench.BenchConfig(**kwargs)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    result = bench.run_replications(cfg, args.reps)

    if args.preset == "nonstationary":
        se = lambda v: _fmt(v) if v is not None else ""
        rows = [[res.summary.arm, _fmt(res.summary.mean_loss), se(res.summary.se_loss),
                 _fmt(res.summary.mean_f), se(res.summary.se_f), str(res.summary.n_reps)]
                for res in (result.arms[a] for a in bench.ARMS)]
        _write_rows(out_dir / "summary.csv",
                    ["arm", "mean_loss", "se_loss", "mean_f", "se_f", "n_reps"], rows)
        for arm in bench.ARMS:
            res = result.arms[arm]
            trace_rows = []
            for rep in range(res.lam_traces.shape[0]):
                for t in range(res.lam_traces.shape[1]):
                    trace_rows.append([str(rep), str(t + 1),
                                       _fmt(res.lam_traces[rep, t]),
                                       _fmt(res.loss_traces[rep, t]),
                                       _fmt(res.f_traces[rep, t])])
            _write_rows(out_dir / f"traces_{arm}.csv",
                        ["rep", "t", "lambda", "lookahead_loss", "f_score"],
                        trace_rows)
        if not args.no_figures:
            plots.plot_nonstationary(result, out_dir / f"bench_{args.preset}_{args.family}.png")
        for arm in bench.ARMS:
            s = result.arms[arm].summary
            print(f"{arm:11s} mean_loss={s.mean_loss:.4f} mean_f={s.mean_f:.4f}")
    else:
        rows = []
        for p in result.p_values:
            d = result.deltas[p]
            se_d = _fmt(np.std(d, ddof=1) / np.sqrt(d.size)) if d.size >= 2 else ""
            rows.append([str(p), _fmt(np.mean(d)), se_d,
                         _fmt(np.median(np.abs(d))),
                         _fmt(np.median(result.cv_norms[p])), str(d.size)])
        _write_rows(out_dir / "summary.csv",
                    ["p", "mean_delta", "se_delta", "median_abs_delta",
                     "median_cv_norm", "n_reps"], rows)
        delta_rows = []
        for p in result.p_values:
            for rep in range(result.deltas[p].size):
                delta_rows.append([str(p), str(rep), _fmt(result.deltas[p][rep]),
                                   _fmt(result.cv_norms[p][rep]),
                                   _fmt(result.lam_cv[p][rep]),
                                   _fmt(result.lam_rap[p][rep])])
        _write_rows(out_dir / "deltas.csv",
                    ["p", "rep", "delta", "cv_norm", "lambda_cv", "lambda_rap"],
                    delta_rows)
        if not args.no_figures:
            plots.plot_stationary(result, out_dir / f"bench_{args.preset}_{args.family}.png")
        for p in result.p_values:
            d = result.deltas[p]
            print(f"p={p:<4d} mean_delta={np.mean(d):+.4f} median_|delta|={np.median(np.abs(d)):.4f}")
    if result.n_failed:
        print(f"warning: {result.n_failed} replication(s) failed and were excluded",
              file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------

def cmd_network(args) -> int:
    header, data = _read_table(args.input)
    n, p = data.shape
    if p < 3:
        raise DataError(f"{args.input}: need at least 3 node columns, got {p}")
    if n < 1:
        raise DataError(f"{args.input}: no data rows")
    for j in range(p):
        if np.ptp(data[:, j]) == 0.0:
            print(f"warning: column {header[j]!r} is constant", file=sys.stderr)

    runners = [RapRunner(p - 1, family="gaussian", r=args.r, epsilon=args.epsilon,
                         lambda0=args.lambda0, mode=args.mode) for _ in range(p)]
    others = [[k for k in range(p) if k != j] for j in range(p)]

    stride = args.stride
    if stride < 1:
        raise UsageError(f"--stride must be >= 1, got {stride}")
    checkpoints = sorted(set(range(stride, n + 1, stride)) | {n})

    lam_traces = np.zeros((n, p))
    edge_rows = []
    edge_counts = []
    for t in range(1, n + 1):
        row = data[t - 1]
        for j in range(p):
            runners[j].step(row[others[j]], row[j])
            lam_traces[t - 1, j] = runners[j].state.lam
        if t in checkpoints:
            # coef[j][i]: weight of node i in the regression of node j
            coef = [dict(zip(others[j], runners[j].fit.beta)) for j in range(p)]
            count = 0
            for i in range(p):
                for j in range(i + 1, p):
                    c_ij = coef[i][j]
                    c_ji = coef[j][i]
                    present = ((c_ij != 0.0 and c_ji != 0.0) if args.and_rule
                               else (c_ij != 0.0 or c_ji != 0.0))
                    if not present:
                        continue
                    vals = [c for c in (c_ij, c_ji) if c != 0.0]
                    edge_rows.append([str(t), str(i + 1), str(j + 1),
                                      _fmt(np.mean(vals))])
                    count += 1
            edge_counts.append(count)

    _write_rows(args.out, ["t", "i", "j", "weight"], edge_rows)
    out = Path(args.out)
    lam_path = out.with_name(out.stem + "_lambda" + (out.suffix or ".csv"))
    lam_header = ["t"] + [f"lambda{j}" for j in range(1, p + 1)]
    lam_rows = [[str(t + 1)] + [_fmt(v) for v in lam_traces[t]] for t in range(n)]
    _write_rows(lam_path, lam_header, lam_rows)

    if not args.no_figures:
        plots.plot_network(checkpoints, edge_counts, lam_traces,
                           _figure_path(args.out), n_nodes=p)
    print(f"{len(edge_rows)} edge rows across {len(checkpoints)} checkpoints; "
          f"penalty traces in {lam_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_stream_flags(sp, with_lambda0=True):
    sp.add_argument("--family", choices=["gaussian", "binomial"], default="gaussian")
    sp.add_argument("--r", type=float, default=0.95, help="forgetting factor in (0, 1]")
    sp.add_argument("--epsilon", type=float, default=0.025, help="penalty step size")
    if with_lambda0:
        sp.add_argument("--lambda0", type=float, default=0.1, help="initial penalty")
    sp.add_argument("--mode", choices=["exact", "approx"], default="exact",
                    help="path-derivative mode")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="raplasso",
        description="Streaming sparse regression with an online, "
                    "gradient-adapted l1 penalty.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic stream CSV")
    sp.add_argument("--out", required=True)
    sp.add_argument("--p", type=int, default=20)
    sp.add_argument("--rho", type=float, default=0.2, help="active proportion")
    sp.add_argument("--duration", type=int, default=300)
    sp.add_argument("--family", choices=["gaussian", "binomial"], default="gaussian")
    sp.add_argument("--blocks", type=int, default=5)
    sp.add_argument("--block-corr", type=float, default=0.8)
    sp.add_argument("--regimes", help="piecewise spec rho:duration[,rho:duration...]")
    sp.add_argument("--preset", choices=["table1"],
                    help="dense/sparse/dense protocol: p=20, 3x100 observations")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--no-truth", action="store_true",
                    help="omit the generating coefficient columns")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("run", help="run the adaptive model over a stream CSV")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    _add_stream_flags(sp)
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("bench", help="run a benchmark preset")
    sp.add_argument("--preset", choices=["stationary", "nonstationary"], required=True)
    sp.add_argument("--family", choices=["gaussian", "binomial"], default="gaussian")
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--r", type=float, default=None, help="override preset forgetting factor")
    sp.add_argument("--epsilon", type=float, default=None, help="override preset step size")
    sp.add_argument("--p", help="stationary preset dimensions, comma separated")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("network", help="neighborhood-selection connectivity over node columns")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    _add_stream_flags(sp)
    sp.add_argument("--stride", type=int, default=25, help="checkpoint interval")
    sp.add_argument("--and-rule", action="store_true",
                    help="require both directed fits to agree on an edge")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_network)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
