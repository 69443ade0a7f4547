"""Command line front end.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import io as rio
from .engine import Mode, SolverOptions, solve_mode
from .experiments import (Method, SyntheticConfig, curves_to_csv, implication_audit,
                          recovery_curve)
from .geometry import CombinatorialExplosionError, DEFAULT_CAP, enumerate_weight_vectors
from .model import ProblemInstance, ValidationError, as_theta
from .preprocess import IRLSDivergenceError, irls_sparse_logistic

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("replasso")

RUN_KEYS = {"trials", "theta", "methods", "criterion", "audit_trials", "n_jobs"}


def _theta_arg(text: str):
    parts = [float(t) for t in text.split(",") if t.strip()]
    return parts[0] if len(parts) == 1 else parts


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _load_problem(args):
    X = rio.read_matrix(args.design)
    partition = rio.read_partition(args.partition, X.shape[1]) if args.partition else None
    return X, partition


def cmd_solve_path(args) -> int:
    X, partition = _load_problem(args)
    y = rio.read_vector(args.response)
    instance = ProblemInstance(X, y)
    mode = Mode(args.mode)
    theta = args.theta
    if mode.grouped:
        if partition is None:
            if np.any(np.asarray(theta) != 0):
                raise ValidationError("--partition is required when theta is nonzero")
        else:
            theta = as_theta(theta, partition)
    options = SolverOptions(lambda_min=args.lambda_min, max_events=args.max_events)
    path = solve_mode(instance, mode, partition, theta, options)
    if path.truncated:
        log.warning("path truncated after %d events", len(path.events))
    _emit(rio.path_to_json(path) if args.format == "json" else rio.path_to_csv(path), args.output)
    return EXIT_OK


def cmd_enumerate_weights(args) -> int:
    partition = rio.read_partition(args.partition)
    family = enumerate_weight_vectors(partition, as_theta(args.theta, partition), args.cap)
    if args.format == "json":
        text = json.dumps({"p": partition.p, "weights": family.tolist()}) + "\n"
    else:
        header = ",".join(f"s{i + 1}" for i in range(partition.p))
        text = header + "\n" + "".join(",".join(rio.fmt(v) for v in row) + "\n" for row in family)
    _emit(text, args.output)
    return EXIT_OK


def load_run_config(source: str):
    """Read an experiment config (a TOML file or a bundled config name)."""
    path = Path(source)
    if path.exists():
        raw = path.read_bytes()
    else:
        bundled = resources.files("replasso") / "configs" / f"{source.removesuffix('.toml')}.toml"
        if not bundled.is_file():
            raise ValidationError(f"config {source!r} not found")
        raw = bundled.read_bytes()
    try:
        doc = tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{source}: {exc}") from None
    synth_keys = {f.name for f in fields(SyntheticConfig)}
    unknown = set(doc) - synth_keys - RUN_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    config = SyntheticConfig(**{k: v for k, v in doc.items() if k in synth_keys})
    run = {"trials": 200, "theta": 2.0, "methods": [m.value for m in Method],
           "criterion": "segment", "audit_trials": None, "n_jobs": None}
    run.update({k: v for k, v in doc.items() if k in RUN_KEYS})
    try:
        run["methods"] = [Method(m) for m in run["methods"]]
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if int(run["trials"]) < 1:
        raise ValidationError("trials must be >= 1")
    if run["criterion"] not in ("segment", "grid"):
        raise ValidationError("criterion must be 'segment' or 'grid'")
    return config, run


def cmd_experiment(args) -> int:
    config, run = load_run_config(args.config)
    n_jobs = args.jobs if args.jobs is not None else run["n_jobs"]
    curves = [recovery_curve(m, config, run["theta"], int(run["trials"]), config.seed,
                             n_jobs=n_jobs, criterion=run["criterion"])
              for m in run["methods"]]
    audit_trials = run["audit_trials"] if run["audit_trials"] is not None else run["trials"]
    audit = implication_audit(config, run["theta"], int(audit_trials), config.seed, n_jobs=n_jobs)
    if args.format == "json":
        doc = {"curves": [{"method": c.method, "support_size": c.support_sizes.tolist(),
                           "probability": c.probabilities.tolist(), "se": c.se.tolist(),
                           "trials": c.trials, "failures": c.failures} for c in curves],
               "audit": audit.as_dict()}
        _emit(json.dumps(doc, indent=1) + "\n", args.output)
    else:
        _emit(curves_to_csv(curves), args.output)
    report = "".join(f"{k}={v}\n" for k, v in audit.as_dict().items())
    if args.audit:
        Path(args.audit).write_text(report)
    else:
        sys.stderr.write(report)
    return EXIT_OK


def cmd_irls_logistic(args) -> int:
    X, partition = _load_problem(args)
    labels = rio.read_vector(args.labels)
    theta = args.theta
    if partition is not None:
        theta = as_theta(theta, partition)
    elif np.any(np.asarray(theta) != 0):
        raise ValidationError("--partition is required when theta is nonzero")
    if args.k < 0:
        raise ValidationError("k must be >= 0")
    lam = args.lam
    if lam is None:
        # ||X~^T y~||_inf at beta = 0, where v = 1/4 and z = 4 (label - 1/2)
        lam = args.lambda_ratio * float(np.max(np.abs(X.T @ (labels - 0.5))))
    result = irls_sparse_logistic(X, labels, partition, theta, lam, args.outer_iters, k=args.k,
                                  line_search=args.line_search)
    rows = []
    for it in result.iterations:
        for rank, (var, grp, lam_in, coef) in enumerate(it.selections, start=1):
            rows.append({"iteration": it.iteration, "rank": rank, "variable": var + 1,
                         "group": None if grp is None else grp + 1,
                         "lambda": lam_in, "coefficient": coef})
    if args.format == "json":
        doc = {"lambda": lam, "converged": result.converged, "selections": rows,
               "beta": result.beta.tolist()}
        text = json.dumps(doc, indent=1) + "\n"
    else:
        cols = ["iteration", "rank", "variable", "group", "lambda", "coefficient"]
        text = ",".join(cols) + "\n"
        for r in rows:
            text += ",".join("" if r[c] is None else (rio.fmt(r[c]) if isinstance(r[c], float) else str(r[c]))
                             for c in cols) + "\n"
    _emit(text, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="replasso", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("-o", "--output", help="write here instead of stdout")

    sp = sub.add_parser("solve-path", help="trace a regularisation path")
    sp.add_argument("--design", required=True)
    sp.add_argument("--response", required=True)
    sp.add_argument("--partition")
    sp.add_argument("--theta", type=_theta_arg, default=0.0,
                    help="one value for all groups or a comma separated list")
    sp.add_argument("--mode", choices=[m.value for m in Mode], default="replasso")
    sp.add_argument("--lambda-min", type=float)
    sp.add_argument("--max-events", type=int)
    common(sp)
    sp.set_defaults(func=cmd_solve_path)

    sp = sub.add_parser("enumerate-weights", help="list the weight vectors of the penalty ball")
    sp.add_argument("--partition", required=True)
    sp.add_argument("--theta", type=_theta_arg, required=True)
    sp.add_argument("--cap", type=int, default=DEFAULT_CAP)
    common(sp)
    sp.set_defaults(func=cmd_enumerate_weights)

    sp = sub.add_parser("experiment", help="Monte-Carlo recovery curves and implication audit")
    sp.add_argument("--config", required=True, help="TOML file or bundled name (fig3a, fig3b, smoke)")
    sp.add_argument("--audit", help="write the audit report here instead of stderr")
    sp.add_argument("--jobs", type=int, help="worker processes (default: $REPH_THREADS or 1)")
    common(sp)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("irls-logistic", help="penalised logistic regression via IRLS")
    sp.add_argument("--design", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--partition")
    sp.add_argument("--theta", type=_theta_arg, default=0.0)
    sp.add_argument("--k", type=int, default=4, help="entries reported per iteration")
    sp.add_argument("--lambda", dest="lam", type=float, help="penalty level (algorithmic scale)")
    sp.add_argument("--lambda-ratio", type=float, default=0.05,
                    help="penalty as a fraction of the starting level when --lambda is absent")
    sp.add_argument("--line-search", action="store_true",
                    help="backtrack when the penalised objective increases")
    sp.add_argument("--outer-iters", type=int, default=50)
    common(sp)
    sp.set_defaults(func=cmd_irls_logistic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, CombinatorialExplosionError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (np.linalg.LinAlgError, IRLSDivergenceError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
