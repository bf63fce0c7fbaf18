"""Batch experiment runner.

    qbsde <subcommand> [--config PATH] [--seed U64] [--out DIR] [--threads N]

The config file holds ``[section]`` headers with ``key = value`` lines.
Every key has a default and unknown sections or keys are rejected.
Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import math
import os
import sys
import time
from typing import Any, Callable

import numpy as np

from .qsim.state import CapacityError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.replace(",", " ").split())


def _opt_float(s: str) -> float | None:
    return None if s.strip().lower() in ("", "none") else float(s)


@dataclasses.dataclass(frozen=True)
class Field:
    parse: Callable[[str], Any]
    default: Any
    help: str


SCHEMA: dict[str, dict[str, Field]] = {
    "problem": {
        "d": Field(int, 1, "spatial dimension"),
        "N": Field(int, 20, "time steps"),
        "T": Field(float, 1.0, "terminal time"),
        "x0": Field(float, 0.0, "initial state (every coordinate)"),
    },
    "train": {
        "estimator": Field(str, "all", "backprop, forward_gradient, numerical or all"),
        "lr": Field(float, 0.01, "SGD learning rate"),
        "batch": Field(int, 20, "paths per iteration"),
        "iterations": Field(int, 2000, "SGD steps"),
        "h": Field(float, 1e-3, "central-difference step"),
        "v_samples": Field(int, 100, "forward-gradient directions per iteration"),
        "truncate_v": Field(_bool, False, "resample direction entries outside +-3"),
        "clip": Field(_opt_float, None, "entrywise gradient clip (none = off)"),
        "widths": Field(_ints, (), "step-network layer sizes (empty = d, d+10, d+10, d)"),
        "record_time": Field(_bool, False, "write measured wall_ms instead of 0"),
        "eval_paths": Field(int, 4096, "held-out paths for bsde-eval"),
        "checkpoint": Field(str, "", "model checkpoint for bsde-eval"),
    },
    "quantum": {
        "phase_bits": Field(_ints, (4, 5, 6, 7, 8, 9), "phase-register sizes to sweep"),
        "n_gauss": Field(int, 4, "qubits for the discretized Gaussian"),
        "trials": Field(int, 20, "independent estimates per phase-register size"),
        "delta": Field(float, 0.1, "failure probability for the median"),
        "amplitude": Field(float, 0.3, "target amplitude for ae-bench"),
        "t": Field(float, 1.0, "entangling time of the ansatz initial state"),
    },
    "mlmc": {
        "eps": Field(float, 0.01, "target accuracy"),
        "r": Field(float, 0.5, "strong order"),
        "a": Field(float, 0.05, "GBM drift"),
        "b": Field(float, 0.2, "GBM volatility"),
        "x0": Field(float, 1.0, "GBM initial value"),
        "pilot": Field(int, 1000, "pilot samples per level"),
    },
    "hybrid": {
        "models": Field(str, "classical,hybrid", "comma list of classical, hybrid, pqc"),
        "hidden": Field(int, 10, "classical hidden width"),
        "lr": Field(float, 0.05, "learning rate"),
        "iterations": Field(int, 400, "SGD steps"),
    },
    "cost": {
        "d": Field(int, 3, "dimension"),
        "g_max": Field(float, 4.0, "largest squared gradient entry"),
        "eps": Field(float, 0.1, "target accuracy"),
        "N": Field(int, 4, "time steps"),
        "lam": Field(float, 1.0, "payoff standard-deviation bound"),
        "r": Field(float, 0.5, "strong order"),
    },
}

COMMANDS = {
    "bsde-train": ("problem", "train"),
    "bsde-eval": ("problem", "train"),
    "grad-bench": ("problem", "train"),
    "qamc": ("quantum",),
    "ae-bench": ("quantum",),
    "mlmc": ("mlmc",),
    "hybrid-train": ("problem", "train", "hybrid", "quantum"),
    "cost-model": ("cost",),
    "emit-plot-data": (),
}


def default_config() -> dict[str, dict[str, Any]]:
    return {s: {k: f.default for k, f in fields.items()} for s, fields in SCHEMA.items()}


def read_config(path: str | None) -> dict[str, dict[str, Any]]:
    cfg = default_config()
    if path is None:
        return cfg
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case sensitive (N vs n)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (configparser.Error, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                cfg[section][key] = SCHEMA[section][key].parse(raw)
            except ValueError as e:
                raise ConfigError(f"[{section}] {key}: {e}") from e
    return cfg


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


# --- subcommands ---------------------------------------------------------------------------

def _problem(cfg):
    from .bsde import make_hjb

    p = cfg["problem"]
    if p["d"] < 1 or p["N"] < 2 or not p["T"] > 0:
        raise ConfigError("need d >= 1, N >= 2, T > 0")
    return make_hjb(p["d"], p["T"], np.full(p["d"], p["x0"]))


def _estimators(cfg) -> list[str]:
    from .bsde import ESTIMATORS

    e = cfg["train"]["estimator"]
    if e == "all":
        return list(ESTIMATORS)
    if e not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {e!r}")
    return [e]


def _train_config(cfg, estimator: str, seed: int, lr=None, iterations=None):
    from .bsde import TrainConfig

    t = cfg["train"]
    try:
        return TrainConfig(lr=t["lr"] if lr is None else lr, batch=t["batch"],
                           iterations=t["iterations"] if iterations is None else iterations, estimator=estimator,
                           h=t["h"], v_samples=t["v_samples"], truncate_v=t["truncate_v"], clip=t["clip"], seed=seed)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _model(cfg, problem, seed: int):
    from .bsde import make_model

    widths = cfg["train"]["widths"] or None
    try:
        return make_model(problem, cfg["problem"]["N"], np.random.default_rng(seed), widths)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def cmd_bsde_train(cfg, seed, out):
    from .bsde import dumps_model, evaluation_loss, train

    problem = _problem(cfg)
    for est in _estimators(cfg):
        model = _model(cfg, problem, seed)
        trained, hist = train(model, problem, _train_config(cfg, est, seed))
        hist.write_csv(os.path.join(out, f"train_{est}.csv"), cfg["train"]["record_time"])
        with open(os.path.join(out, f"model_{est}.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_model(trained))
        e0, e1 = evaluation_loss(model, problem), evaluation_loss(trained, problem)
        print(f"{est}: u0={trained.u0:.6f} eval loss {e0:.4g} -> {e1:.4g}")


def cmd_bsde_eval(cfg, seed, out):
    from .bsde import evaluation_loss, hjb_reference, loads_model

    problem = _problem(cfg)
    path = cfg["train"]["checkpoint"]
    if not path or not os.path.isfile(path):
        raise ConfigError(f"checkpoint not found: {path!r}")
    with open(path, encoding="utf-8") as fh:
        try:
            model = loads_model(fh.read())
        except ValueError as e:
            raise ConfigError(str(e)) from e
    rows = [("u0", model.u0), ("eval_loss", evaluation_loss(model, problem, cfg["train"]["eval_paths"], seed))]
    if problem.d == 1:
        ref = hjb_reference(1, problem.T, float(problem.x0[0]))
        rows += [("reference_u0", ref), ("relative_error", abs(model.u0 - ref) / abs(ref))]
    _write_csv(os.path.join(out, "eval.csv"), ["metric", "value"], [(k, _fmt(v)) for k, v in rows])
    for k, v in rows:
        print(f"{k}: {v:.6g}")


def cmd_grad_bench(cfg, seed, out):
    from .bsde import estimate_gradient, sample_batch
    from .rng import Stream

    problem = _problem(cfg)
    model = _model(cfg, problem, seed)
    batch = sample_batch(problem, model.grid, cfg["train"]["batch"], Stream(seed, "grad-bench"))
    ref = None
    rows = []
    for est in ("backprop", "forward_gradient", "numerical"):
        t0 = time.perf_counter()
        loss, g = estimate_gradient(model, problem, batch, _train_config(cfg, est, seed), Stream(seed, "directions"))
        ms = 1e3 * (time.perf_counter() - t0)
        ref = g if ref is None else ref
        ms_out = f"{ms:.3f}" if cfg["train"]["record_time"] else "0"
        rows.append((est, _fmt(loss), _fmt(float(np.max(np.abs(g - ref)))), _fmt(float(np.linalg.norm(g))), ms_out))
    _write_csv(os.path.join(out, "grad_bench.csv"), ["estimator", "loss", "max_abs_diff", "norm", "wall_ms"], rows)


def cmd_qamc(cfg, seed, out):
    from .qsim.ampest import qamc_mean
    from .sde import discretize_gaussian

    q = cfg["quantum"]
    dist = discretize_gaussian(q["n_gauss"], 1.0)
    vals = dist.points ** 2
    truth = float(dist.probs @ vals)
    rng = np.random.default_rng(seed)
    rows = []
    for m in q["phase_bits"]:
        for _ in range(q["trials"]):
            r = qamc_mean(dist, vals, 0.0, float(vals.max()), 0.1, q["delta"], rng, m=m)
            rows.append((1 << m, _fmt(r.value), _fmt(truth), _fmt(abs(r.value - truth)), r.samples_or_queries))
    _write_csv(os.path.join(out, "qamc.csv"), ["k", "estimate", "true_value", "abs_error", "queries"], rows)


def cmd_ae_bench(cfg, seed, out):
    from .qsim.ampest import amplitude_estimate

    q = cfg["quantum"]
    a = q["amplitude"]
    if not 0 <= a <= 1:
        raise ConfigError("amplitude must lie in [0, 1]")
    chi = np.array([math.sqrt(1 - a), math.sqrt(a)], dtype=np.complex128)
    good = np.array([False, True])
    rng = np.random.default_rng(seed)
    rows = []
    for m in q["phase_bits"]:
        est = amplitude_estimate(chi, good, m, rng, reps=q["trials"])
        for e in est:
            rows.append((1 << m, _fmt(e), _fmt(a), _fmt(abs(e - a)), 1 + 2 * ((1 << m) - 1)))
    _write_csv(os.path.join(out, "ae_bench.csv"), ["k", "estimate", "true_value", "abs_error", "queries"], rows)


def cmd_mlmc(cfg, seed, out):
    from .mc import MlmcConfigError, mlmc_estimate
    from .rng import Stream
    from .sde import gbm_spec

    m = cfg["mlmc"]
    if not 0 < m["eps"] < 1:
        raise ConfigError("eps must lie in (0, 1)")
    spec = gbm_spec(1, m["a"], m["b"], m["x0"], 1.0)
    try:
        res, levels = mlmc_estimate(spec, lambda x: x[:, 0], m["eps"], m["r"], Stream(seed, "mlmc"), m["pilot"])
    except MlmcConfigError as e:
        raise ConfigError(str(e)) from e
    _write_csv(os.path.join(out, "mlmc.csv"), ["level", "samples", "mean_correction", "variance", "cost"],
               [(s.level, s.samples, _fmt(s.mean_correction), _fmt(s.variance), s.cost) for s in levels])
    print(f"estimate {res.value:.6f} +- {res.half_width:.2g} (exact {m['x0'] * math.exp(m['a']):.6f})")


def cmd_hybrid_train(cfg, seed, out):
    from .autodiff.network import stored_param_count
    from .bsde import evaluation_loss, make_model, train
    from .hybrid import make_hybrid, match_widths, pqc_only_model

    problem = _problem(cfg)
    d, N = problem.d, cfg["problem"]["N"]
    h = cfg["hybrid"]
    sizes = [d, h["hidden"], h["hidden"], d]
    report = []
    for kind in [k.strip() for k in h["models"].split(",") if k.strip()]:
        rng = np.random.default_rng(seed)
        if kind == "classical":
            model = make_model(problem, N, rng, sizes)
        elif kind == "hybrid":
            a, c = match_widths(d, stored_param_count(sizes))
            nets = tuple(make_hybrid(d, a, c, rng, t=cfg["quantum"]["t"]) for _ in range(N - 1))
            model = make_model(problem, N, rng, nets=nets)
        elif kind == "pqc":
            nets = tuple(pqc_only_model(d, rng, cfg["quantum"]["t"]) for _ in range(N - 1))
            model = make_model(problem, N, rng, nets=nets)
        else:
            raise ConfigError(f"unknown model kind {kind!r}")
        trained, hist = train(model, problem, _train_config(cfg, "backprop", seed, h["lr"], h["iterations"]))
        _write_csv(os.path.join(out, f"hybrid_{kind}.csv"), ["iteration", "loss"],
                   [(i, _fmt(l)) for i, l in enumerate(hist.loss)])
        e0, e1 = evaluation_loss(model, problem), evaluation_loss(trained, problem)
        report.append((kind, model.n_params, e0, e1))
    with open(os.path.join(out, "hybrid_report.txt"), "w", encoding="utf-8") as fh:
        fh.write("model params eval_loss_initial eval_loss_final ratio\n")
        for kind, n, e0, e1 in report:
            fh.write(f"{kind} {n} {e0:.6g} {e1:.6g} {e1 / e0:.4f}\n")
        best = min(report, key=lambda r: r[3])[0] if report else "-"
        fh.write(f"lowest final loss: {best} (single seed; stochastic training, not a ranking claim)\n")
    for kind, n, e0, e1 in report:
        print(f"{kind}: {n} params, eval loss {e0:.4g} -> {e1:.4g}")


def cmd_cost_model(cfg, seed, out):
    from .costs import (SHAPE_NOTE, complexity_table, loss_estimation_budget, payoff_variance_bound,
                        theoretical_budget)

    c = cfg["cost"]
    rows = []
    inputs = f"d={c['d']} g={c['g_max']} eps={c['eps']}"
    for name, v in complexity_table(c["d"], c["g_max"], c["eps"]):
        rows.append((f"grad/{name}", inputs, v))
    for mode in ("classical", "qamc"):
        b = theoretical_budget(mode, c["N"], c["d"], c["eps"], c["lam"])
        for k, v in b.items():
            rows.append((f"budget/{mode}/{k}", f"N={c['N']} d={c['d']} eps={c['eps']} lam={c['lam']}", v))
        b = theoretical_budget(mode, None, c["d"], c["eps"], c["lam"], c["r"])
        for k, v in b.items():
            rows.append((f"solution/{mode}/{k}", f"r={c['r']} d={c['d']} eps={c['eps']} lam={c['lam']}", v))
    rows.append(("lambda_max^2", "K_fp=1 K2=1 dt=1/N r C=1 x0=0",
                 payoff_variance_bound(1.0, 1.0, 1.0 / c["N"], c["r"], 1.0, 0.0)))
    rows.append(("loss_budget", f"L=1 f0=0 E_X2={c['d']} eps={c['eps']}",
                 loss_estimation_budget(1.0, 0.0, float(c["d"]), c["eps"])))
    _write_csv(os.path.join(out, "cost_model.csv"), ["formula", "inputs", "value"],
               [(a, b, _fmt(float(v))) for a, b, v in rows])
    w = max(len(r[0]) for r in rows)
    print(f"# {SHAPE_NOTE}")
    for a, b, v in rows:
        print(f"{a:<{w}}  {b:<40}  {float(v):.6g}")


def emit_plot_data(paths: list[str], out_path: str) -> int:
    """Merge `iteration,loss,...` histories into long-format `series,iteration,loss`."""
    rows = []
    for p in paths:
        if not os.path.isfile(p):
            raise ConfigError(f"history file not found: {p}")
        with open(p, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header is None or header[:2] != ["iteration", "loss"]:
                raise ConfigError(f"{p}: expected columns iteration,loss")
            series = os.path.splitext(os.path.basename(p))[0]
            rows += [(series, row[0], row[1]) for row in r]
    _write_csv(out_path, ["series", "iteration", "loss"], rows)
    return len(rows)


# --- entry point ---------------------------------------------------------------------------

HANDLERS = {
    "bsde-train": cmd_bsde_train,
    "bsde-eval": cmd_bsde_eval,
    "grad-bench": cmd_grad_bench,
    "qamc": cmd_qamc,
    "ae-bench": cmd_ae_bench,
    "mlmc": cmd_mlmc,
    "hybrid-train": cmd_hybrid_train,
    "cost-model": cmd_cost_model,
}

SUMMARIES = {
    "bsde-train": "train the deep BSDE solver on HJB with each gradient estimator",
    "bsde-eval": "evaluate a saved model (and compare with the reference at d=1)",
    "grad-bench": "compare the three gradient estimators on one batch",
    "qamc": "QAMC error versus queries on a discretized Gaussian",
    "ae-bench": "amplitude-estimation error versus phase-register size",
    "mlmc": "multilevel Monte Carlo on geometric Brownian motion",
    "hybrid-train": "train classical, hybrid and PQC-only step networks",
    "cost-model": "evaluate the closed-form query complexities",
    "emit-plot-data": "merge loss histories into one long-format CSV",
}


def _schema_help(sections) -> str:
    lines = ["config keys (section.key = default):"]
    for s in sections:
        for k, f in SCHEMA[s].items():
            d = " ".join(map(str, f.default)) if isinstance(f.default, tuple) else f.default
            lines.append(f"  [{s}] {k} = {d}    {f.help}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qbsde", description=__doc__.split("\n\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    for name, sections in COMMANDS.items():
        sp = sub.add_parser(name, help=SUMMARIES[name], description=SUMMARIES[name],
                            epilog=_schema_help(sections) if sections else None,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", metavar="PATH", help="sectioned key = value file")
        sp.add_argument("--seed", type=int, default=0, help="root seed (unsigned 64-bit)")
        sp.add_argument("--out", metavar="DIR", default=".", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        if name == "emit-plot-data":
            sp.add_argument("histories", nargs="*", help="CSV files with iteration,loss columns")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        if not 0 <= args.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("threads must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        if args.command == "emit-plot-data":
            if args.config:
                read_config(args.config)
            emit_plot_data(args.histories, os.path.join(args.out, "plot_data.csv"))
            return EXIT_OK
        cfg = read_config(args.config)
        HANDLERS[args.command](cfg, args.seed, args.out)
        return EXIT_OK
    except (ConfigError, CapacityError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as e:
        print(f"numeric failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
