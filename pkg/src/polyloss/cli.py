"""Command-line entry point.

Subcommands: ``eval``, ``coefficients``, ``verify``, ``train``, ``sweep``.
Exit codes: 0 success, 1 verification failure, 2 training divergence,
64 usage error.  Config files are JSON objects whose keys are the flag names
in snake_case; flags given on the command line win over the file.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from polyloss import losses as L
from polyloss import series as S
from polyloss import trainer as T
from polyloss import verify as V
from polyloss.oracle import write_reports

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_DIVERGED = 2
EXIT_USAGE = 64

log = logging.getLogger("polyloss")

DATASETS = {
    "blobs": {"generator": "blobs", "k": 2, "n_per_class": 100, "d": 2, "separation": 4.0},
    "blobs10": {"generator": "blobs", "k": 10, "n_per_class": 100, "d": 8, "separation": 4.0},
    "imbalanced": {"generator": "imbalanced", "n_majority": 1000, "n_minority": 10,
                   "overlap": 1.0, "d": 2},
    "balanced": {"generator": "imbalanced", "n_majority": 500, "n_minority": 500,
                 "overlap": 1.0, "d": 2},
    "long-tail": {"generator": "long-tail", "k": 10, "n_head": 200, "decay": 0.7, "d": 2,
                  "separation": 3.0},
}

LOSS_KEYS = ("loss", "eps1", "eps2", "eps", "gamma", "n", "alpha", "coefficients")
TRAIN_DEFAULTS = {
    "loss": L.CE, "dataset": "blobs", "dataset_seed": 0, "model": T.LINEAR_SOFTMAX,
    "learning_rate": 0.1, "weight_decay": 1e-4, "batch_size": 32, "steps": 2000,
    "eval_every": 100, "seed": 0, "smoothing": 0.0, "alpha_balance": None,
    "test_fraction": 0.2,
}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def grid_spec(text: str) -> list[float]:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:step, got {text!r}") from exc
    if not step > 0 or stop < start:
        raise argparse.ArgumentTypeError(f"empty grid {text!r}")
    return S.pt_grid(start, stop, step).tolist()


def _add_loss_flags(p):
    g = p.add_argument_group("loss")
    g.add_argument("--loss", choices=L.FAMILIES, default=argparse.SUPPRESS)
    g.add_argument("--eps1", type=float, default=argparse.SUPPRESS)
    g.add_argument("--eps2", type=float, default=argparse.SUPPRESS)
    g.add_argument("--eps", type=float_list, default=argparse.SUPPRESS,
                   help="Poly-N perturbations eps_1,...,eps_N")
    g.add_argument("--gamma", type=float, default=argparse.SUPPRESS)
    g.add_argument("--n", type=int, default=argparse.SUPPRESS)
    g.add_argument("--alpha", type=float, default=argparse.SUPPRESS)
    g.add_argument("--coefficients", type=float_list, default=argparse.SUPPRESS)


def _add_common(p):
    p.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="JSON config file")
    p.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--no-plot", action="store_true", default=argparse.SUPPRESS,
                   help="skip figure rendering")


def _add_train_flags(p):
    _add_loss_flags(p)
    g = p.add_argument_group("training")
    g.add_argument("--dataset", choices=sorted(DATASETS), default=argparse.SUPPRESS)
    g.add_argument("--dataset-seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--model", choices=T.MODELS, default=argparse.SUPPRESS)
    g.add_argument("--learning-rate", "--lr", dest="learning_rate", type=float,
                   default=argparse.SUPPRESS)
    g.add_argument("--weight-decay", type=float, default=argparse.SUPPRESS)
    g.add_argument("--batch-size", type=int, default=argparse.SUPPRESS)
    g.add_argument("--steps", type=int, default=argparse.SUPPRESS)
    g.add_argument("--eval-every", type=int, default=argparse.SUPPRESS)
    g.add_argument("--smoothing", type=float, default=argparse.SUPPRESS)
    g.add_argument("--alpha-balance", type=float, default=argparse.SUPPRESS)
    g.add_argument("--test-fraction", type=float, default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="polyloss", description="Polynomial-expansion classification losses.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("eval", help="evaluate a loss and its derivative")
    _add_common(p)
    _add_loss_flags(p)
    p.add_argument("--pt", type=float, action="append", default=argparse.SUPPRESS)
    p.add_argument("--grid", type=grid_spec, default=argparse.SUPPRESS,
                   help="pt grid as start:stop:step")

    p = sub.add_parser("coefficients", help="dump polynomial coefficients of a loss")
    _add_common(p)
    _add_loss_flags(p)
    p.add_argument("--horizon", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("verify", help="run verification suites")
    _add_common(p)
    p.add_argument("suite", choices=V.SUITES)
    p.add_argument("--zeta", type=float, default=argparse.SUPPRESS)
    p.add_argument("--delta", type=float, default=argparse.SUPPRESS)
    p.add_argument("--tolerance", type=float, default=argparse.SUPPRESS)
    p.add_argument("--grid-step", type=float, default=argparse.SUPPRESS)
    p.add_argument("--seeds", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("train", help="train one linear classifier")
    _add_common(p)
    _add_train_flags(p)

    p = sub.add_parser("sweep", help="train once per value of one parameter")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--param", default=argparse.SUPPRESS)
    p.add_argument("--values", type=float_list, default=argparse.SUPPRESS)
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
    return parser


def effective_options(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults <- config file <- command-line flags."""
    opts = dict(defaults)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "verbose", "config")}
    config_path = getattr(args, "config", None)
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in loaded.items()})
    opts.update(flags)
    return opts


def loss_spec(opts: dict) -> L.LossSpec:
    d = {"family": opts.get("loss", L.CE)}
    for key in L.FAMILY_PARAMS.get(d["family"], ()):
        if opts.get(key) is not None:
            d[key] = opts[key]
    ignored = [k for k in LOSS_KEYS[1:] if opts.get(k) is not None and k not in d]
    if ignored:
        log.warning("loss %s ignores %s", d["family"], ", ".join(ignored))
    return L.LossSpec.from_dict(d)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n",
                    encoding="utf-8")


def rows_to_csv(rows: list[dict], fieldnames: list[str] | None = None) -> str:
    buf = io.StringIO()
    fieldnames = fieldnames or list(rows[0])
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    return format(v, ".12g") if isinstance(v, float) else v


def _want_plot(opts) -> bool:
    return not opts.get("no_plot", False)


# subcommands

def cmd_eval(opts: dict) -> int:
    spec = loss_spec(opts)
    if "grid" in opts and opts["grid"] is not None:
        pts = list(opts["grid"])
    elif opts.get("pt") is not None:
        pts = opts["pt"] if isinstance(opts["pt"], list) else [opts["pt"]]
    else:
        raise UsageError("eval needs --pt or --grid")
    for p in pts:
        if not 0 < p <= 1:
            raise UsageError(f"pt must lie in (0, 1], got {p}")
    rows = [{"pt": p, "loss": float(L.loss(spec, p)), "dloss_dpt": float(L.loss_grad_pt(spec, p))}
            for p in pts]
    text = rows_to_csv([{k: _fmt(v) for k, v in r.items()} for r in rows])
    sys.stdout.write(text)
    out = opts.get("out")
    if out is not None:
        effective = {"command": "eval", "loss": spec.to_dict(), "pts": pts}
        h = config_hash(effective)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{h}-eval.csv").write_text(text, encoding="utf-8")
        dump_json(effective, out / f"{h}-eval.config.json")
        if _want_plot(opts) and len(rows) > 1:
            from polyloss.plotting import plot_loss_curve
            plot_loss_curve(rows, out / f"{h}-eval.png", V.describe_spec(spec), effective)
    return EXIT_OK


def coefficient_rows(spec: L.LossSpec, horizon: int) -> list[dict]:
    if spec.family in (L.FOCAL, L.POLY1_FL, L.POLY1_STAR_FL) and float(spec.gamma) != int(spec.gamma):
        raise UsageError(f"gamma={spec.gamma} is fractional: the polynomial basis has integer "
                         f"powers only, so focal-type coefficients need an integer gamma")
    shift = int(spec.gamma) if spec.family in (L.FOCAL, L.POLY1_FL, L.POLY1_STAR_FL) else 0
    schedule = S.schedule_for(spec, max(horizon - shift, 0))
    return [{"j": j, "alpha_j": c} for j, c in enumerate(schedule.coefficients(horizon), start=1)]


def cmd_coefficients(opts: dict) -> int:
    spec = loss_spec(opts)
    horizon = int(opts.get("horizon") or 10)
    if horizon < 1:
        raise UsageError("horizon must be >= 1")
    rows = coefficient_rows(spec, horizon)
    text = rows_to_csv([{k: _fmt(v) for k, v in r.items()} for r in rows])
    sys.stdout.write(text)
    out = opts.get("out")
    if out is not None:
        effective = {"command": "coefficients", "loss": spec.to_dict(), "horizon": horizon}
        h = config_hash(effective)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{h}-coefficients.csv").write_text(text, encoding="utf-8")
        dump_json(effective, out / f"{h}-coefficients.config.json")
        if _want_plot(opts):
            from polyloss.plotting import plot_coefficients
            plot_coefficients(rows, out / f"{h}-coefficients.png", V.describe_spec(spec), effective)
    return EXIT_OK


def cmd_verify(opts: dict) -> int:
    kwargs = {k: opts[k] for k in ("tolerance", "zeta", "delta") if opts.get(k) is not None}
    if opts.get("grid_step") is not None:
        kwargs["grid_step"] = opts["grid_step"]
    if opts.get("seeds") is not None:
        kwargs["seeds"] = opts["seeds"]
    try:
        result = V.run_suite(opts["suite"], **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for r in result.residuals:
        row = r.to_row()
        print(f"theorem1 zeta={r.zeta:g} delta={r.delta:g} N={r.n} "
              f"max|R|={row['max_abs_residual']:.3e} max|R'|={row['max_abs_residual_derivative']:.3e} "
              f"{'PASS' if r.passed else 'FAIL'}")
    for e in result.equivalences:
        print(f"expansion {e.family} horizon={e.horizon} max_err={e.max_error:.3e} "
              f"{'PASS' if e.passed else 'FAIL'}")
    if result.reports:
        n_bad = sum(not r.passed for r in result.reports)
        print(f"oracle reports: {len(result.reports) - n_bad}/{len(result.reports)} pass")
    for name, ok in result.controls.items():
        print(f"{name}: {'detected' if ok else 'NOT DETECTED'}")
    for r in result.reports:
        if not r.passed:
            print(f"FAIL {r.op_name} {r.inputs} primary={r.primary_value!r} "
                  f"oracle={r.oracle_value!r} rel_err={r.rel_error:.3e}")
    out = opts.get("out")
    if out is not None:
        effective = {"command": "verify", "suite": opts["suite"], **kwargs}
        h = config_hash(effective)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        dump_json(effective, out / f"{h}-verify.config.json")
        if result.reports:
            write_reports(result.reports, out / f"{h}-oracle.csv")
        if result.residuals:
            write_reports(result.residuals, out / f"{h}-theorem1.csv")
            if _want_plot(opts):
                from polyloss.plotting import plot_residuals
                plot_residuals(result.residuals, out / f"{h}-theorem1.png", effective)
        if result.equivalences:
            write_reports(result.equivalences, out / f"{h}-expansion.csv")
    print("PASS" if result.passed else "FAIL")
    return EXIT_OK if result.passed else EXIT_VERIFY_FAILED


def train_config(opts: dict) -> T.TrainConfig:
    dataset = opts["dataset"]
    if isinstance(dataset, str):
        if dataset not in DATASETS:
            raise UsageError(f"unknown dataset {dataset!r}; expected one of {sorted(DATASETS)}")
        dataset = dict(DATASETS[dataset])
    fields = {k: opts[k] for k in TRAIN_DEFAULTS if k not in ("loss", "dataset")}
    return T.TrainConfig(loss=loss_spec(opts), dataset=dataset, **fields)


def per_eval_rows(record: dict, h: str) -> tuple[list[str], list[dict]]:
    n_classes = len(record["per_eval"][0]["mean_pt_per_class"])
    fieldnames = (["step", "train_loss", "train_accuracy", "mean_pt_overall"]
                  + [f"mean_pt_class_{c}" for c in range(n_classes)]
                  + ["gradient_fraction_first_term", "seed", "config_hash"])
    rows = []
    for e in record["per_eval"]:
        row = {k: _fmt(e[k]) for k in ("step", "train_loss", "train_accuracy", "mean_pt_overall",
                                        "gradient_fraction_first_term")}
        row.update({f"mean_pt_class_{c}": _fmt(v) for c, v in enumerate(e["mean_pt_per_class"])})
        row.update({"seed": record["config"]["seed"], "config_hash": h})
        rows.append(row)
    return fieldnames, rows


def write_run(record: T.RunRecord, out: Path, plot: bool) -> Path:
    """Write one run's artifacts under ``out/<hash>/``; returns the record path."""
    cfg = record.config.to_dict()
    h = config_hash(cfg)
    run_dir = out / h
    run_dir.mkdir(parents=True, exist_ok=True)
    data = record.to_dict()
    data["config_hash"] = h
    dump_json(data, run_dir / f"{h}-record.json")
    dump_json({"config_hash": h, "wall_time": record.wall_time}, run_dir / f"{h}-timing.json")
    fieldnames, rows = per_eval_rows(data, h)
    (run_dir / f"{h}-per_eval.csv").write_text(rows_to_csv(rows, fieldnames), encoding="utf-8")
    if len(record.final["class_counts"]) == 2:
        rep = T.imbalance_report(record)
        rep = [{**{k: _fmt(v) for k, v in r.items()}, "seed": cfg["seed"], "config_hash": h}
               for r in rep]
        (run_dir / f"{h}-imbalance.csv").write_text(rows_to_csv(rep), encoding="utf-8")
    if plot:
        from polyloss.plotting import plot_run
        plot_run(data, run_dir / f"{h}-mean_pt.png", cfg)
    return run_dir / f"{h}-record.json"


def _diverged(exc: T.TrainingDiverged, out: Path | None) -> int:
    print(f"training diverged at step {exc.diagnostic['step']} "
          f"(loss={exc.diagnostic['loss']!r})", file=sys.stderr)
    if out is not None:
        h = config_hash(exc.diagnostic["config"])
        path = Path(out) / h / f"{h}-diverged.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        dump_json(exc.diagnostic, path)
        print(f"diagnostic record: {path}", file=sys.stderr)
    return EXIT_DIVERGED


def cmd_train(opts: dict) -> int:
    try:
        cfg = train_config(opts)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        record = T.train(cfg)
    except T.TrainingDiverged as exc:
        return _diverged(exc, opts.get("out"))
    f = record.final
    print(f"final train_accuracy={f['train_accuracy']:.4f} mean_pt={f['mean_pt_overall']:.4f} "
          f"train_loss={f['train_loss']:.6g}")
    if opts.get("out") is not None:
        path = write_run(record, Path(opts["out"]), _want_plot(opts))
        print(f"record: {path}")
    return EXIT_OK


def cmd_sweep(opts: dict) -> int:
    param, values = opts.get("param"), opts.get("values")
    if param is None or values is None:
        raise UsageError("sweep needs --param and --values")
    if param in ("n", "batch_size", "steps", "seed", "dataset_seed"):
        values = [int(v) for v in values]
    try:
        base = train_config(opts)
        configs = T.sweep_configs(base, param, values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        records = T.sweep(base, param, values, jobs=int(opts.get("jobs") or 1))
    except T.TrainingDiverged as exc:
        return _diverged(exc, opts.get("out"))
    summary = []
    for v, r in zip(values, records):
        summary.append({"value": v, "final_accuracy": r.final["train_accuracy"],
                        "final_mean_pt": r.final["mean_pt_overall"],
                        "test_accuracy": r.final["test_accuracy"]})
        print(f"{param}={v}: accuracy={r.final['train_accuracy']:.4f} "
              f"mean_pt={r.final['mean_pt_overall']:.4f}")
    out = opts.get("out")
    if out is not None:
        sweep_cfg = {"base": base.to_dict(), "param": param, "values": values}
        h = config_hash(sweep_cfg)
        sweep_dir = Path(out) / h
        sweep_dir.mkdir(parents=True, exist_ok=True)
        plot = _want_plot(opts)
        runs = [write_run(r, sweep_dir / "runs", False) for r in records]
        rows = [{**{k: _fmt(v) for k, v in s.items()}, "seed": c.seed,
                 "config_hash": config_hash(c.to_dict())} for s, c in zip(summary, configs)]
        (sweep_dir / f"{h}-summary.csv").write_text(rows_to_csv(rows), encoding="utf-8")
        dump_json({"sweep": sweep_cfg, "config_hash": h, "summary": summary,
                   "runs": [str(p.relative_to(sweep_dir)) for p in runs]},
                  sweep_dir / f"{h}-sweep.json")
        if plot:
            from polyloss.plotting import plot_sweep
            plot_sweep(param, values, [r.to_dict() for r in records],
                       sweep_dir / f"{h}-sweep.png", sweep_cfg)
        print(f"summary: {sweep_dir / f'{h}-summary.csv'}")
    return EXIT_OK


COMMANDS = {
    "eval": (cmd_eval, {}),
    "coefficients": (cmd_coefficients, {"horizon": 10}),
    "verify": (cmd_verify, {}),
    "train": (cmd_train, TRAIN_DEFAULTS),
    "sweep": (cmd_sweep, {**TRAIN_DEFAULTS, "jobs": 1}),
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func, defaults = COMMANDS[args.command]
    try:
        opts = effective_options(args, defaults)
        return func(opts)
    except UsageError as exc:
        print(f"polyloss {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # invalid loss parameters surface here with the violated bound in the message
        print(f"polyloss {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
