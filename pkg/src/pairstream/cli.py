"""Command-line driver: ``pairstream {run,sweep,bounds,disttest,ingest}``.

Exit codes: 0 success, 1 configuration or input error, 2 runtime failure
(including a failed distribution test). Defaults may come from a flat
``key = value`` file given with ``--config``; command-line flags win.
``PAIRSTREAM_SEED`` sets the master seed when ``--seeds`` is absent.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bounds as bd
from .core import make_stream
from .data import SplitSpec, dataset_stats, load_libsvm, normalize_features, split, synth_gaussian
from .evaluation import auc_score, metric_pair_auc, online_to_batch_report
from .learners import LearnerConfig, average_hypothesis, olp_run
from .losses import PairwiseLoss
from .rng import RandomSource
from .sampling import Policy, run_disttests

RUN_COLUMNS = ["dataset", "policy", "s", "seed", "auc", "ensembleAvgRisk", "avgHypRisk", "wallMillis"]
BOUND_COLUMNS = ["table", "variant", "formula", "value"]
DISTTEST_COLUMNS = ["test", "statistic", "threshold", "pass"]
HIST_COLUMNS = ["slot", "stream_index", "count"]
MIN_DISTTEST_TRIALS = 10_000

# spawn indices of the per-run streams derived from a run's master seed
SPLIT_STREAM, SHUFFLE_STREAM, BUFFER_STREAM = 0, 1, 2


class ConfigError(Exception):
    """Bad flags, config file or input data (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# value parsers


def int_list(text: str) -> list[int]:
    """``"0,1,5"`` or ranges like ``"0-9"`` (inclusive), mixed freely."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if sep and lo:
            a, b = int(lo), int(hi)
            if b < a:
                raise argparse.ArgumentTypeError(f"empty range {part!r}")
            out.extend(range(a, b + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def policy_list(text: str) -> list[Policy]:
    try:
        return [Policy.parse(p) for p in str(text).split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def synth_spec(text: str) -> dict:
    """``"n_pos=500,n_neg=500,d=10,separation=3,seed=0"``; omitted keys keep defaults."""
    spec = {"n_pos": 500, "n_neg": 500, "d": 10, "separation": 3.0, "seed": 0}
    for part in str(text).split(","):
        if not part.strip():
            continue
        key, sep, val = part.partition("=")
        key = key.strip()
        if not sep or key not in spec:
            raise argparse.ArgumentTypeError(f"bad synthetic spec entry {part!r}")
        spec[key] = float(val) if key == "separation" else int(val)
    return spec


def positive_float(text: str) -> float:
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def bool_value(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` comments; dashes and underscores interchangeable."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


# ---------------------------------------------------------------------------
# output


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render(rows: list[dict], columns: list[str], fmt: str) -> str:
    if fmt == "json":
        clean = [{k: _json_value(row.get(k)) for k in columns} for row in rows]
        return json.dumps(clean, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(k)) for k in columns])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def write_output(text: str, path: str | None) -> None:
    """Write to ``path`` atomically (temp file then rename), or to stdout."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".pairstream-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# experiments


def _load_dataset(args):
    if args.data and args.synth:
        raise ConfigError("give either --data or --synth, not both")
    if args.data:
        if not os.path.isfile(args.data):
            raise ConfigError(f"data file not found: {args.data}")
        positive = None
        if args.positive_labels:
            positive = [float(v) for v in args.positive_labels.split(",")]
        try:
            data = load_libsvm(args.data, positive_labels=positive)
        except ValueError as exc:
            raise ConfigError(f"{args.data}: {exc}") from None
    else:
        spec = args.synth or synth_spec("")
        data = synth_gaussian(spec["n_pos"], spec["n_neg"], spec["d"], spec["separation"],
                              RandomSource(spec["seed"]), name="gaussian")
    return normalize_features(data, args.normalize)


def _seeds(args) -> list[int]:
    if args.seeds:
        return args.seeds
    env = os.environ.get("PAIRSTREAM_SEED")
    if env is None:
        return [0]
    try:
        return [int(env)]
    except ValueError:
        raise ConfigError(f"PAIRSTREAM_SEED is not an integer: {env!r}") from None


def run_one(data, task: str, policy: Policy, s: int, seed: int, eta: float, radius: float,
            sigma: float, split_spec: SplitSpec, timing: bool = False) -> dict:
    """One grid cell: split, shuffle, learn, evaluate on the held-out part."""
    start = time.perf_counter()
    master = RandomSource(seed)
    train, test = split(data, split_spec, master.spawn(SPLIT_STREAM))
    stream = make_stream(train, master.spawn(SHUFFLE_STREAM))
    loss = PairwiseLoss(task, sigma)
    cfg = LearnerConfig(eta=eta, buffer_capacity=s, policy=policy, radius=radius, loss=loss,
                        record_snapshots=False)
    trace = olp_run(stream, cfg, master.spawn(BUFFER_STREAM))
    avg = average_hypothesis(trace)
    auc = auc_score(avg, test) if task == "auc" else metric_pair_auc(avg, test)
    report = online_to_batch_report(trace, test, loss, include_best=False)
    wall = round((time.perf_counter() - start) * 1000.0) if timing else None
    return {"dataset": data.name, "policy": policy.value, "s": s, "seed": seed, "auc": auc,
            "ensembleAvgRisk": report["ensembleAvgRisk"], "avgHypRisk": report["avgHypRisk"],
            "wallMillis": wall}


def _grid(args, data, policies, sizes, seeds):
    spec = SplitSpec(args.train_frac, args.train_cap)
    cells = [(p, s, seed) for p in policies for s in sizes for seed in seeds]
    common = (args.eta, args.radius, args.sigma, spec, args.timing)
    jobs = getattr(args, "jobs", 1) or 1
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {c: pool.submit(run_one, data, args.task, c[0], c[1], c[2], *common) for c in cells}
            results = {c: f.result() for c, f in futures.items()}
    else:
        results = {c: run_one(data, args.task, c[0], c[1], c[2], *common) for c in cells}
    # deterministic (policy, s, seed) order regardless of completion order
    return [results[c] for c in cells]


def summarize(rows: list[dict]) -> str:
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["policy"], r["s"]), []).append(r["auc"])
    lines = ["policy,s,seeds,auc_mean,auc_sd"]
    for (policy, s), vals in groups.items():
        v = np.asarray(vals)
        sd = float(v.std(ddof=1)) if len(v) > 1 else 0.0
        lines.append(f"{policy},{s},{len(v)},{float(v.mean()):.4f},{sd:.4f}")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    data = _load_dataset(args)
    policies = args.policy or [Policy.RSX]
    if len(policies) != 1:
        raise ConfigError("run takes a single policy; use sweep for several")
    sizes = args.buffer_sizes or [64]
    rows = _grid(args, data, policies, sizes, _seeds(args))
    write_output(render(rows, RUN_COLUMNS, args.format), args.out)
    return 0


def cmd_sweep(args) -> int:
    sizes = args.buffer_sizes or []
    if len(sizes) < 2:
        raise ConfigError("sweep needs ≥2 sizes")
    data = _load_dataset(args)
    rows = _grid(args, data, args.policy or [Policy.RSX], sizes, _seeds(args))
    write_output(render(rows, RUN_COLUMNS, args.format), args.out)
    summary = summarize(rows)
    (sys.stderr if args.out in (None, "-") else sys.stdout).write(summary)
    return 0


def _bound_inputs(args) -> bd.BoundInputs:
    q = args.q
    if q is None and args.p > 1:
        q = args.p / (args.p - 1.0)
    try:
        return bd.BoundInputs(
            n=args.n, d=args.d, norm_x=args.norm_x, norm_x_2=args.norm_x_2, norm_x_inf=args.norm_x_inf,
            norm_w=args.norm_w, p=args.p, q=q, kappa=args.kappa, num_kernels=args.num_kernels,
            L=args.lipschitz, Y=args.label_bound, B=args.loss_bound, delta=args.delta,
            regret=args.regret if args.regret is not None else 0.0, s=args.s or 1, c_d=args.c_d)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_bounds(args) -> int:
    inp = _bound_inputs(args)
    rows = []
    try:
        for name in args.tables:
            if name not in bd.TABLES:
                raise ConfigError(f"unknown table {name!r}; choose from {', '.join(bd.TABLES)}")
            fn, variants, formulas = bd.TABLES[name]
            for v in variants:
                rows.append({"table": name, "variant": v, "formula": formulas[v], "value": fn(v, inp)})
        if args.regret is not None:
            if args.rad_term is not None:
                rad = [args.rad_term] * (inp.n - 1)
            else:
                # R_{t-1}(loss o H) from the L2 row of the AUC table and contraction
                rad = [bd.contraction_bound(inp.L, inp.Y, bd.auc_rademacher_bound(
                    "Lq-ball", bd.BoundInputs(n=t - 1, norm_x=inp.norm_x, norm_w=inp.norm_w, p=2.0)))
                    for t in range(2, inp.n + 1)]
            rows.append({"table": "excess-risk", "variant": "all-pairs",
                         "formula": "4/(n-1)*sum(rad)+regret/(n-1)+6*B*sqrt(log(n/delta)/(n-1))",
                         "value": bd.excess_risk_bound_rhs("bounded", inp, rad)})
            if args.s:
                rows.append({"table": "excess-risk", "variant": "buffer",
                             "formula": "regret/(n-1)+4*C_d/sqrt(s)+6*B*sqrt(log(n/delta)/s)",
                             "value": bd.excess_risk_bound_rhs("buffer", inp)})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_output(render(rows, BOUND_COLUMNS, args.format), args.out)
    return 0


def cmd_disttest(args) -> int:
    if args.trials < MIN_DISTTEST_TRIALS:
        raise ConfigError(f"disttest needs at least {MIN_DISTTEST_TRIALS} trials")
    if args.s < 1 or args.stream_len < 2:
        raise ConfigError("need s >= 1 and stream length >= 2")
    policy = (args.policy or [Policy.RSX])
    if len(policy) != 1:
        raise ConfigError("disttest takes a single policy")
    seed = _seeds(args)[0]
    results, hist = run_disttests(policy[0], args.s, args.stream_len, args.trials, seed,
                                  alpha=args.alpha, tv_tol=args.tv_tol)
    rows = [{"test": r.name, "statistic": float(r.statistic), "threshold": r.threshold,
             "pass": bool(r.passed)} for r in results]
    write_output(render(rows, DISTTEST_COLUMNS, args.format), args.out)
    if args.hist_out:
        slots, idx = np.nonzero(hist >= 0)
        hrows = [{"slot": int(a), "stream_index": int(b) + 1, "count": int(hist[a, b])}
                 for a, b in zip(slots, idx)]
        write_output(render(hrows, HIST_COLUMNS, "csv"), args.hist_out)
    return 0 if all(r["pass"] for r in rows) else 2


def cmd_ingest(args) -> int:
    if not args.data:
        raise ConfigError("ingest needs --data")
    args.synth = None
    data = _load_dataset(args)
    stats = dataset_stats(data)
    if args.format == "json":
        text = json.dumps(stats, indent=2) + "\n"
    else:
        text = render([stats], list(stats), "csv")
    write_output(text, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_experiment_flags(p):
    src = p.add_argument_group("data")
    src.add_argument("--data", help="LIBSVM file")
    src.add_argument("--synth", type=synth_spec, help="synthetic Gaussian task, e.g. n_pos=500,n_neg=500,d=10,separation=3,seed=0")
    src.add_argument("--positive-labels", help="comma list of labels mapped to +1 (multi-class files)")
    src.add_argument("--normalize", choices=["unit-l2", "none"], default="unit-l2")
    src.add_argument("--train-frac", type=float, default=0.6)
    src.add_argument("--train-cap", type=int, default=20000)
    lrn = p.add_argument_group("learner")
    lrn.add_argument("--task", choices=["auc", "metric"], default="auc")
    lrn.add_argument("--policy", type=policy_list, help="FIFO, RS, RSX or RSX2 (comma list for sweep)")
    lrn.add_argument("--buffer-sizes", type=int_list)
    lrn.add_argument("--eta", type=positive_float, default=1.0)
    lrn.add_argument("--radius", type=positive_float, default=1.0)
    lrn.add_argument("--sigma", type=float, default=0.0)
    lrn.add_argument("--seeds", type=int_list)
    lrn.add_argument("--timing", nargs="?", const=True, default=False, type=bool_value,
                     help="fill wallMillis (makes output run-dependent)")


def _add_output_flags(p):
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--config", help="flat key = value defaults file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pairstream", description="Online pairwise learning with finite buffers.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("run", help="one policy and buffer size over one or more seeds")
    _add_experiment_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid over policies, buffer sizes and seeds")
    _add_experiment_flags(p)
    _add_output_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="Rademacher bound tables and excess-risk bounds")
    p.add_argument("--tables", type=lambda t: [x.strip() for x in t.split(",") if x.strip()],
                   default=list(bd.TABLES))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--norm-x", type=float, default=1.0)
    p.add_argument("--norm-x-2", type=float, default=1.0)
    p.add_argument("--norm-x-inf", type=float, default=1.0)
    p.add_argument("--norm-w", type=float, default=1.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--num-kernels", type=int, default=2)
    p.add_argument("--lipschitz", type=float, default=1.0)
    p.add_argument("--label-bound", type=float, default=2.0)
    p.add_argument("--loss-bound", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--regret", type=float, help="adds excess-risk rows")
    p.add_argument("--rad-term", type=float, help="constant R_{t-1}(loss o H); default derived")
    p.add_argument("--s", type=int, help="buffer capacity (adds the buffer row)")
    p.add_argument("--c-d", type=float, default=1.0)
    _add_output_flags(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("disttest", help="Monte-Carlo checks of a buffer policy's sampling law")
    p.add_argument("--policy", type=policy_list)
    p.add_argument("--s", type=int, default=4)
    p.add_argument("--stream-len", type=int, default=20)
    p.add_argument("--trials", type=int, default=200_000)
    p.add_argument("--seeds", type=int_list, help="first entry is used")
    p.add_argument("--alpha", type=float, default=1e-3)
    p.add_argument("--tv-tol", type=float, default=0.01)
    p.add_argument("--hist-out", help="slot histogram CSV")
    _add_output_flags(p)
    p.set_defaults(func=cmd_disttest)

    p = sub.add_parser("ingest", help="parse and validate a LIBSVM file, print statistics")
    p.add_argument("--data")
    p.add_argument("--positive-labels")
    p.add_argument("--normalize", choices=["unit-l2", "none"], default="none")
    _add_output_flags(p)
    p.set_defaults(func=cmd_ingest)
    return parser


def _apply_config(parser, argv):
    """Re-parse with config-file values installed as subcommand defaults."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    cfg = read_config(args.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, val in cfg.items():
        if key not in known or key in ("config", "func", "help"):
            raise ConfigError(f"unknown config key {key!r} for {args.command}")
        action = known[key]
        try:
            defaults[key] = action.type(val) if action.type else val
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise ConfigError(f"config key {key}: {exc}") from None
        if action.choices is not None and defaults[key] not in action.choices:
            raise ConfigError(f"config key {key}: {val!r} not in {list(action.choices)}")
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"pairstream: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"pairstream: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
