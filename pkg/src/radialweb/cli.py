"""Command-line entry point: ``radialweb <command> [options]``.

Options may also come from a ``key=value`` file given with ``--config``;
flags on the command line win.  Each run writes one data file (CSV or JSON)
that is a pure function of the configuration, plus a ``.meta.json`` file
holding timings and provenance.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import _jsonio
from .errors import ContaminationError, DegenerateFitError, DomainError, ParameterError
from .parallel import resolve_workers

SCHEMA = 1
EXIT_OK, EXIT_CHECK, EXIT_PARAM, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("simulate", "tail", "clt", "b1", "b2", "eta", "multipath", "spacing", "cansado",
            "discretize", "hausdorff")


# -- argument parsing ----------------------------------------------------------

def _floats(text):
    """Comma list, or ``logspace:lo:hi:num`` / ``linspace:lo:hi:num``."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    for kind in ("logspace", "linspace"):
        if text.startswith(kind + ":"):
            _, lo, hi, num = text.split(":")
            if kind == "logspace":
                return np.unique(np.round(np.logspace(float(lo), float(hi), int(num)))).tolist()
            return np.linspace(float(lo), float(hi), int(num)).tolist()
    return [float(v) for v in text.split(",") if v.strip()]


def _starts(text):
    out = []
    for item in str(text).split(","):
        y, s = item.split(":")
        out.append((float(y), float(s)))
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override its entries")
    common.add_argument("--n", type=int, default=10000)
    common.add_argument("--alpha", type=float, default=0.5)
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--output-dir", default=".")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--check", action="store_true", help="exit 1 when the acceptance threshold fails")
    common.add_argument("--window", type=float, default=None)

    p = argparse.ArgumentParser(prog="radialweb", description="Radial Poissonian web experiments")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="build one radial web realisation")
    s.add_argument("--delta", type=float, default=0.3)
    s.add_argument("--kappa", type=float, default=0.1)
    s.add_argument("--restrict", action="store_true")

    s = sub.add_parser("tail", parents=[common], help="coalescence-time survival curve")
    s.add_argument("--sep", type=float, default=1.0)
    s.add_argument("--t-grid", type=_floats, default=_floats("logspace:0:3:31"))
    s.add_argument("--fit-window", type=_floats, default=[10.0, 1000.0])
    s.add_argument("--start-level", type=int, default=0)

    s = sub.add_parser("clt", parents=[common], help="single-path CLT")
    s.add_argument("--t", type=_floats, default=[0.25, 0.5])

    for name, th in (("b1", 2), ("b2", 3)):
        s = sub.add_parser(name, parents=[common], help=f"P[eta >= {th}] across eps")
        s.add_argument("--t", type=float, default=0.5)
        s.add_argument("--eps", type=_floats, default=[0.4, 0.2, 0.1])
        s.add_argument("--start-level", type=int, default=0)

    s = sub.add_parser("eta", parents=[common], help="mean eta against the limit formula")
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--t", type=float, default=0.5)
    s.add_argument("--a", type=float, default=0.0)
    s.add_argument("--b", type=float, default=0.2)

    s = sub.add_parser("multipath", parents=[common], help="several paths: marginals and spread")
    s.add_argument("--starts", type=_starts, default=_starts("0:0,1:0"))
    s.add_argument("--times", type=_floats, default=[0.02, 0.04, 0.06, 0.08, 0.1])

    sub.add_parser("spacing", parents=[common], help="level-time spacings")

    s = sub.add_parser("cansado", parents=[common], help="mark-count bounds across levels")
    s.add_argument("--eps", type=float, default=1.0)

    s = sub.add_parser("discretize", parents=[common], help="grid paths under pitch halving")
    s.add_argument("--a", type=float, default=0.3)
    s.add_argument("--r0", type=float, default=1.0)
    s.add_argument("--max-halvings", type=int, default=40)
    s.add_argument("--levels-beyond", type=int, default=0)

    s = sub.add_parser("hausdorff", parents=[common], help="radial web vs its polar unrolling")
    s.add_argument("--delta", type=float, default=0.3)
    s.add_argument("--kappa", type=float, default=0.1)
    return p


def _read_config(path):
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise _IOFailure(str(e)) from e
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line without '=': {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


class _IOFailure(Exception):
    pass


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = _read_config(args.config)
        sp = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sp._actions}
        for k in cfg:
            if k not in known or k in ("config", "help"):
                raise ParameterError(f"unknown config key {k!r}")
        explicit = set()
        for tok in argv:
            if tok.startswith("--"):
                explicit.add(tok[2:].split("=", 1)[0].replace("-", "_"))
        for k, v in cfg.items():
            if k in explicit:
                continue
            act = known[k]
            if act.const is True and act.nargs == 0:
                setattr(args, k, v.lower() in ("1", "true", "yes"))
            else:
                setattr(args, k, act.type(v) if act.type else v)
    return args


# -- output --------------------------------------------------------------------

def _config_dict(args):
    d = {k: v for k, v in sorted(vars(args).items())
         if k not in ("workers", "output_dir", "config", "check")}
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


def _config_hash(cfg):
    return hashlib.sha256(_jsonio.dumps(cfg).encode()).hexdigest()[:16]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _version():
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    from . import __version__
    return __version__


def render(result: dict, cfg: dict, fmt: str) -> str:
    """Data file text: a table (``columns`` + ``rows``) and a summary."""
    if fmt == "json":
        doc = {"schema": SCHEMA, "config": cfg}
        doc.update(result)
        return _jsonio.dumps(doc, indent=1) + "\n"
    lines = ["# schema: %d" % SCHEMA, "# config: " + _jsonio.dumps(cfg)]
    for k, v in result.get("summary", {}).items():
        lines.append(f"# {k}: {_jsonio.dumps(v)}")
    lines.append(",".join(result["columns"]))
    for row in result["rows"]:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


# -- commands ------------------------------------------------------------------

def _table(columns, rows, summary, passed=None, discarded=0):
    out = {"columns": list(columns), "rows": [list(r) for r in rows], "summary": dict(summary)}
    if passed is not None:
        out["summary"]["pass"] = bool(passed)
    out["discarded"] = discarded
    return out


def cmd_simulate(args):
    from .radial import ModelParams, build_drpw, restrict_family
    from .streams import RngStream
    params = ModelParams(args.n, args.alpha, args.delta, args.kappa)
    fam = build_drpw(params, RngStream(args.seed))
    if args.restrict:
        fam = restrict_family(fam)
    c = fam.event_counts()
    if args.format == "json":
        doc = _jsonio.loads(fam.to_json())
        return {"family": doc, "summary": {"event_counts": c}, "discarded": 0}
    rows = []
    for pid, (k, i) in enumerate(fam.starts()):
        p = fam.path(k, i)
        for (x, y), circ in zip(p.nodes, p.circles):
            rows.append((pid, int(circ), float(x), float(y)))
    return _table(("path", "circle", "x", "y"), rows, {"event_counts": c})


def cmd_tail(args):
    from .coalescence import fit_tail, sample_tau
    curve = sample_tau(args.n, args.alpha, args.sep, args.start_level, args.t_grid, args.trials,
                       args.seed, window=args.window, workers=args.workers)
    fit = fit_tail(curve, args.fit_window)
    summary = {"c_hat": fit.c_hat, "slope": fit.slope, "slope_ci": list(fit.slope_ci),
               "fit_window": list(fit.fit_window), "plateau_ratio": fit.plateau_ratio,
               "trials_used": curve.trials, "contamination_rate": curve.contamination_rate,
               "crossings": curve.crossings}
    ok = -0.6 <= fit.slope <= -0.4 and fit.plateau_ratio <= 2.0
    discarded = args.trials - curve.trials
    return _table(("t", "survival", "stderr"), curve.rows(), summary, ok, discarded)


def cmd_clt(args):
    from .convergence import clt_report, sample_paths
    ps = sample_paths(args.n, args.t, args.trials, args.seed, args.alpha, args.workers)
    rows, ok = [], True
    for i in range(len(args.t)):
        r = clt_report(ps, i)
        rows.append((r.t, r.samples, r.empirical_var, r.predicted_var, r.ratio, r.ks_stat, r.ks_p,
                     r.lindeberg_var, r.ks_p_lindeberg))
        ok &= r.ks_p > 0.01 and 0.95 <= r.ratio <= 1.05
    summary = {"c2_hat": ps.c2_hat, "omega2_mean": ps.omega2_mean}
    return _table(("t", "samples", "empirical_var", "predicted_var", "ratio", "ks_stat", "ks_p",
                   "lindeberg_var", "ks_p_lindeberg"), rows, summary, ok)


def _sweep_cmd(args, threshold):
    from .convergence import eta_runs
    runs = eta_runs(args.n, args.alpha, args.t, args.eps, args.trials, args.seed,
                    args.start_level, args.window, args.workers)
    p, se, hits = runs.prob(threshold)
    order = np.argsort(-runs.eps)
    rows = [(runs.eps[i], p[i], se[i], int(hits[i]), int(runs.usable.sum())) for i in order]
    ratios, ok = [], True
    lo, hi = (0.3, 0.7) if threshold == 2 else (0.15, 0.4)
    for a, b in zip(order[:-1], order[1:]):
        if abs(runs.eps[b] - runs.eps[a] / 2) > 1e-12 or p[a] == 0:
            continue
        ratio = p[b] / p[a]
        enough = threshold == 2 or min(hits[a], hits[b]) >= 50
        ratios.append([float(runs.eps[a]), float(ratio), bool(enough)])
        if enough:
            ok &= lo <= ratio <= hi
    summary = {"ratios": ratios, "contamination_rate": runs.contamination_rate}
    return _table(("eps", "p", "stderr", "hits", "trials"), rows, summary, ok and bool(ratios),
                  int((~runs.usable).sum()))


def cmd_b1(args):
    return _sweep_cmd(args, 2)


def cmd_b2(args):
    return _sweep_cmd(args, 3)


def cmd_eta(args):
    from .convergence import eta_mean_bound
    r = eta_mean_bound(args.n, args.alpha, args.t0, args.t, args.a, args.b, args.trials, args.seed,
                       args.workers)
    rows = [(args.t0, args.t, args.a, args.b, r.mean, r.stderr, r.limit, r.rel_error)]
    return _table(("t0", "t", "a", "b", "mean", "stderr", "limit", "rel_error"), rows,
                  {"trials_used": r.trials}, r.rel_error <= 0.15, args.trials - r.trials)


def cmd_multipath(args):
    from .convergence import multipath_test
    r = multipath_test(args.n, args.alpha, args.starts, args.times, args.trials, args.seed,
                       args.workers)
    rows = []
    for o, t in enumerate(r.times):
        for i in range(r.marginal_var.shape[1]):
            rows.append((t, i, r.marginal_var[o, i], r.predicted_var[o, i], r.marginal_ks_p[o, i]))
    summary = {"single_slope": r.single_slope, "pair_slope": r.pair_slope,
               "slope_ratio": r.slope_ratio, "c2_hat": r.c2_hat, "flips": r.flips,
               "met_fraction": r.met_fraction}
    ok = 1.8 <= r.slope_ratio <= 2.2 and r.flips == 0
    return _table(("t", "path", "var", "predicted_var", "ks_p"), rows, summary, ok)


def cmd_spacing(args):
    from .levels import level_spacing
    rep = level_spacing(args.n, args.alpha)
    rows = [(j, s) for j, s in enumerate(rep.spacings)]
    summary = {"min": rep.min, "max": rep.max, "bound": rep.bound, "inv_alpha_sq": rep.asymptotic}
    return _table(("j", "spacing"), rows, summary, rep.min >= 1.0 and rep.max <= rep.bound)


def cmd_cansado(args):
    from .levels import cansado_violation_fraction
    from .streams import LABEL_COUNTS, RngStream
    fr = [cansado_violation_fraction(args.n, args.alpha, args.eps,
                                     RngStream(args.seed, s, LABEL_COUNTS))
          for s in range(args.trials)]
    rows = [(s, f) for s, f in enumerate(fr)]
    med = float(np.median(fr))
    return _table(("seed", "violation_fraction"), rows, {"median": med}, med < 0.01)


def cmd_discretize(args):
    from .levels import LevelSystem, halvings_to_agreement
    from .streams import RngStream
    rows, ok = [], True
    for s in range(args.trials):
        sys_ = LevelSystem(args.n, args.alpha, RngStream(args.seed, s), window=args.window,
                           levels_beyond=args.levels_beyond)
        h, fr = halvings_to_agreement(sys_, args.a, args.r0, args.max_halvings)
        rows.append((s, -1 if h is None else h, fr[-1]))
        ok &= h is not None
    return _table(("realization", "halvings", "final_agreement"), rows, {}, ok)


def cmd_hausdorff(args):
    from .radial import ModelParams, build_drpw
    from .streams import RngStream
    from .transforms import lambda_discrepancy
    params = ModelParams(args.n, args.alpha, args.delta, args.kappa)
    rows = []
    for s in range(args.trials):
        fam = build_drpw(params, RngStream(args.seed, s))
        rows.append((s, lambda_discrepancy(fam), fam.event_frequency()))
    d = [r[1] for r in rows]
    return _table(("seed", "discrepancy", "event_frequency"), rows,
                  {"median_discrepancy": float(np.median(d))})


HANDLERS = {name: globals()["cmd_" + name] for name in COMMANDS}


def validate(args):
    """Range checks shared by every command, run before any work starts."""
    if args.n < 2:
        raise ParameterError("n must be >= 2")
    if not 0 < args.alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    if args.trials < 1:
        raise ParameterError("trials must be >= 1")
    if args.seed < 0:
        raise ParameterError("seed must be non-negative")
    if args.window is not None and not args.window > 0:
        raise ParameterError("window must be positive")
    if hasattr(args, "delta"):
        from .radial import ModelParams
        ModelParams(args.n, args.alpha, args.delta, args.kappa)


def run(args) -> int:
    t_start = time.time()
    validate(args)
    args.workers = resolve_workers(args.workers)
    cfg = _config_dict(args)
    result = HANDLERS[args.command](args)
    wall = time.time() - t_start
    ext = "json" if args.format == "json" else "csv"
    out = Path(args.output_dir)
    data = out / f"{args.command}.{ext}"
    meta = {"schema": SCHEMA, "command": args.command, "config": cfg,
            "config_hash": _config_hash(cfg), "version": _version(), "wall_clock_s": wall,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "workers": args.workers,
            "discarded": int(result.get("discarded", 0)), "data_file": data.name}
    try:
        _atomic_write(data, render(result, cfg, args.format))
        _atomic_write(out / f"{args.command}.meta.json", json.dumps(meta, indent=1) + "\n")
    except OSError as e:
        raise _IOFailure(str(e)) from e
    passed = result.get("summary", {}).get("pass")
    print(f"{args.command}: wrote {data}" + ("" if passed is None else f" (pass={passed})"))
    if args.check and passed is False:
        return EXIT_CHECK
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        return run(args)
    except (ParameterError, DomainError, DegenerateFitError, ContaminationError) as e:
        print(f"radialweb: invalid parameters: {e}", file=sys.stderr)
        return EXIT_PARAM
    except _IOFailure as e:
        print(f"radialweb: I/O failure: {e}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as e:
        # argparse reports usage errors with status 2
        return int(e.code) if isinstance(e.code, int) else EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
