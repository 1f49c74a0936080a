"""``hawkesgc`` command line.

Each subcommand accepts ``--config file.json`` holding the same options
(keys are the long flag names, with ``-`` or ``_``). Flags given on the
command line win over the config file, which wins over built-in defaults.
Failures exit nonzero with a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import io
from .basis import select_basis
from .core import extract_graph
from .evaluation import evaluate, threshold_sweep
from .experiment import ExperimentPlan, SweepPlan, log_grid, run_experiment, \
    sweep_hyperparameters
from .learn import METHODS, LearnConfig, fit
from .simulate import make_synthetic

EXIT_USAGE = 2
EXIT_FAILURE = 1


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _csv_ints(s):
    return [int(x) for x in str(s).split(",") if x.strip()]


def _csv_strs(s):
    return [x.strip() for x in str(s).split(",") if x.strip()]


# name -> (type, default, help); defaults apply after the config file
_OPTIONS = {
    "simulate": {
        "family": (str, "sine", "sine | pwc"),
        "num-seq": (int, 500, "number of sequences"),
        "horizon": (float, 50.0, "observation horizon T"),
        "seed": (int, 0, "master seed"),
        "num-types": (int, 5, "number of event types"),
        "window": (str, "continuous", "kernel support window: continuous | printed"),
        "out": (str, None, "output dataset (JSONL)"),
        "truth": (str, None, "output ground truth (JSON)"),
    },
    "select-basis": {
        "data": (str, None, "dataset (JSONL)"),
        "rho": (float, 0.01, "relative residual budget"),
        "epsilon": (float, None, "absolute residual budget (overrides rho)"),
        "horizon": (float, None, "basis horizon (default: longest sequence)"),
        "variant": (str, "exact", "tail bound: exact | printed"),
        "out": (str, None, "also write the basis JSON here"),
    },
    "fit": {
        "data": (str, None, "training dataset (JSONL)"),
        "basis": (str, None, "basis JSON (default: select from the data)"),
        "method": (str, None, "MLE | MLE-S | MLE-GL | MLE-SGL | MLE-SGLP"),
        "alpha-s": (float, 0.0, "l1 weight"),
        "alpha-g": (float, 0.0, "group-lasso weight"),
        "alpha-p": (float, 0.0, "pairwise-similarity weight"),
        "clusters": (str, None, "clusters JSON, 1-based types"),
        "eta": (float, None, "prox step size"),
        "line-search": (bool, False, "halve the prox step until the objective does not rise"),
        "inner-max": (int, 100, "EM iterations per outer loop"),
        "outer-max": (int, 50, "outer loops"),
        "tol": (float, 1e-5, "relative change tolerance"),
        "num-types": (int, None, "number of types (default: from data)"),
        "seed": (int, 0, "initialisation seed"),
        "out": (str, None, "output model JSON"),
        "report": (str, None, "output fit report JSON"),
    },
    "evaluate": {
        "model": (str, None, "model JSON"),
        "truth": (str, None, "ground truth JSON"),
        "test": (str, None, "held-out dataset (JSONL)"),
        "grid-step": (float, None, "quadrature step (default horizon/2000)"),
        "graph-tol": (float, 1e-7, "edge threshold on group norms"),
        "pairs": (bool, False, "include the per-pair kernel error table"),
        "threshold-sweep": (bool, False, "include a precision-recall threshold sweep"),
        "out": (str, None, "output report JSON (default: stdout)"),
    },
    "experiment": {
        "family": (str, "sine", "sine | pwc"),
        "sizes": (_csv_ints, [50, 100, 150, 200, 250], "training sizes, comma separated"),
        "trials": (int, 10, "number of trials"),
        "test-size": (int, 250, "held-out sequences per trial"),
        "methods": (_csv_strs, ["MLE", "MLE-SGLP"], "methods, comma separated"),
        "alpha-s": (float, 10.0, "l1 weight"),
        "alpha-g": (float, 100.0, "group-lasso weight"),
        "alpha-p": (float, 1000.0, "pairwise-similarity weight"),
        "clusters": (str, None, "clusters JSON (default {1,2,3},{4,5})"),
        "horizon": (float, 50.0, "observation horizon"),
        "seed": (int, 0, "master seed"),
        "workers": (int, None, "parallel trials (capped by HG_THREADS)"),
        "out-dir": (str, None, "output directory"),
    },
    "sweep": {
        "data": (str, None, "training dataset (JSONL)"),
        "test": (str, None, "held-out dataset (JSONL)"),
        "truth": (str, None, "optional ground truth JSON for edge scores"),
        "basis": (str, None, "basis JSON (default: select from the data)"),
        "profiles": (_csv_strs, ["alpha_s", "alpha_g", "alpha_p"], "weights to vary"),
        "grid-lo": (float, 1e-2, "smallest grid value"),
        "grid-hi": (float, 1e4, "largest grid value"),
        "grid-num": (int, 7, "log-spaced grid points"),
        "alpha-s": (float, 10.0, "fixed l1 weight"),
        "alpha-g": (float, 100.0, "fixed group-lasso weight"),
        "alpha-p": (float, 1000.0, "fixed pairwise weight"),
        "clusters": (str, None, "clusters JSON (default {1,2,3},{4,5})"),
        "seed": (int, 0, "initialisation seed"),
        "out": (str, None, "output CSV"),
    },
}

_REQUIRED = {
    "simulate": ("out",),
    "select-basis": ("data",),
    "fit": ("data", "out"),
    "evaluate": ("model", "truth"),
    "experiment": ("out-dir",),
    "sweep": ("data", "test", "out"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hawkesgc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, opts in _OPTIONS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with default option values")
        for flag, (typ, default, help_) in opts.items():
            dflt = "" if default is None else f" (default: {default})"
            if typ is bool:
                p.add_argument(f"--{flag}", action="store_true", default=argparse.SUPPRESS,
                               help=help_)
            else:
                p.add_argument(f"--{flag}", type=typ, default=argparse.SUPPRESS,
                               help=help_ + dflt)
    return parser


def resolve_options(command: str, args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the config file and command-line flags."""
    opts = _OPTIONS[command]
    merged = {flag.replace("-", "_"): default for flag, (_, default, _) in opts.items()}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise CliError("config file must hold a JSON object")
        for key, value in cfg.items():
            flag = key.replace("_", "-")
            if flag not in opts:
                raise CliError(f"unknown config key {key!r} for {command}")
            typ = opts[flag][0]
            if value is not None and typ in (_csv_ints, _csv_strs) and isinstance(value, list):
                value = [int(x) for x in value] if typ is _csv_ints else [str(x) for x in value]
            elif value is not None and typ is not bool:
                value = typ(value)
            merged[flag.replace("-", "_")] = value
    for flag in opts:
        dest = flag.replace("-", "_")
        if dest in vars(args):
            merged[dest] = getattr(args, dest)
    missing = [f"--{f}" for f in _REQUIRED[command] if merged[f.replace("-", "_")] is None]
    if missing:
        raise CliError(f"{command}: missing required option(s) {', '.join(missing)}")
    return merged


def _default_clusters(path, num_types):
    if path:
        return io.read_clusters(path, num_types)
    return io.clusters_from_lists([[1, 2, 3], [4, 5]], num_types)


def cmd_simulate(o: dict) -> dict:
    data, gt = make_synthetic(o["num_seq"], o["horizon"], o["family"], seed=o["seed"],
                              num_types=o["num_types"], window=o["window"])
    io.write_dataset(data, o["out"])
    if o["truth"]:
        io.write_truth(gt, o["truth"])
    return {"sequences": len(data), "events": data.total_events,
            "spectral_radius": gt.spectral_radius()}


def cmd_select_basis(o: dict) -> dict:
    data = io.read_dataset(o["data"])
    basis = select_basis(data, o["epsilon"], rho=o["rho"], horizon=o["horizon"],
                         variant=o["variant"])
    if o["out"]:
        io.write_json(basis.to_dict(), o["out"])
    return basis.to_dict()


def cmd_fit(o: dict) -> dict:
    data = io.read_dataset(o["data"], o["num_types"])
    basis = io.read_basis(o["basis"]) if o["basis"] else select_basis(data)
    clusters = io.read_clusters(o["clusters"], data.num_types) if o["clusters"] else None
    common = dict(eta=o["eta"], inner_max=o["inner_max"], outer_max=o["outer_max"],
                  inner_tol=o["tol"], outer_tol=o["tol"], seed=o["seed"],
                  line_search=o["line_search"])
    if o["method"]:
        cfg = LearnConfig.for_method(o["method"], o["alpha_s"], o["alpha_g"], o["alpha_p"],
                                     clusters=clusters, **common)
    else:
        cfg = LearnConfig(o["alpha_s"], o["alpha_g"], o["alpha_p"],
                          clusters if o["alpha_p"] > 0 else None, **common)
    params, report = fit(data, basis, cfg)
    io.write_model(params, basis, o["out"])
    if o["report"]:
        d = report.to_dict()
        d["edges"] = [[s + 1, t + 1] for s, t in extract_graph(params).edges()]
        io.write_json(d, o["report"])
    return {"final_loglike": report.final_loglike, "converged": report.converged,
            "zero_groups": report.zero_groups}


def cmd_evaluate(o: dict) -> dict:
    params, basis = io.read_model(o["model"])
    truth = io.read_truth(o["truth"])
    test = io.read_dataset(o["test"], params.num_types) if o["test"] else None
    rep = evaluate(params, basis, truth, test, tol=o["graph_tol"], grid_step=o["grid_step"])
    d = rep.to_dict(include_pairs=o["pairs"])
    if o["threshold_sweep"]:
        d["threshold_sweep"] = threshold_sweep(params, truth.graph())
    if o["out"]:
        io.write_json(d, o["out"])
    return d


def cmd_experiment(o: dict) -> dict:
    clusters = _default_clusters(o["clusters"], 5)
    for m in o["methods"]:
        if m not in METHODS:
            raise CliError(f"unknown method {m!r}")
    plan = ExperimentPlan(family=o["family"], training_sizes=tuple(o["sizes"]),
                          num_trials=o["trials"], test_size=o["test_size"],
                          methods=tuple(o["methods"]), alpha_s=o["alpha_s"],
                          alpha_g=o["alpha_g"], alpha_p=o["alpha_p"],
                          clusters=clusters.clusters, horizon=o["horizon"], seed=o["seed"])
    summary = run_experiment(plan, o["out_dir"], workers=o["workers"])
    return {"config_hash": summary["config_hash"], "rows": len(summary["rows"]),
            "out_dir": o["out_dir"]}


def cmd_sweep(o: dict) -> dict:
    train = io.read_dataset(o["data"])
    test = io.read_dataset(o["test"], train.num_types)
    basis = io.read_basis(o["basis"]) if o["basis"] else select_basis(train)
    truth = io.read_truth(o["truth"]) if o["truth"] else None
    clusters = _default_clusters(o["clusters"], train.num_types)
    plan = SweepPlan(grid=tuple(log_grid(o["grid_lo"], o["grid_hi"], o["grid_num"])),
                     profiles=tuple(o["profiles"]),
                     fixed={"alpha_s": o["alpha_s"], "alpha_g": o["alpha_g"],
                            "alpha_p": o["alpha_p"]},
                     clusters=clusters.clusters, seed=o["seed"])
    rows = sweep_hyperparameters(train, test, plan, basis=basis, truth=truth,
                                 out_path=o["out"])
    return {"points": len(rows), "failed": sum(r["status"] != "ok" for r in rows)}


COMMANDS = {
    "simulate": cmd_simulate,
    "select-basis": cmd_select_basis,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
}


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CliError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve_options(args.command, args)
        result = COMMANDS[args.command](opts)
    except CliError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except (OSError, ValueError, KeyError, IndexError, TypeError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_FAILURE)
    json.dump(result, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
