"""Command-line entry point: ``latentsearch {search,infer,synth,experiment,skeleton}``.

Every run writes a JSON manifest next to its first output.  Exit status is 0
on success, 2 for malformed input files or configs and 3 when a search
produces non-finite values.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import baselines as bl
from .causal import DEFAULT_BETAS, InferGraphConfig, ThresholdRule, infer_graph
from .io import (
    JointFormatError,
    comparison_to_csv,
    frontier_to_csv,
    read_joint,
    trace_to_csv,
    write_joint,
    write_manifest,
)
from .search import SearchConfig, best_point, latent_search, restart_init, run_search_grid
from .skeleton import (
    DEFAULT_MISSING,
    SKELETON_CMI_THRESHOLD,
    TableError,
    edge_diff,
    load_edge_list,
    load_table,
    recover_skeleton,
)
from .synth import (
    DEFAULT_DIRICHLET_PARAMS,
    accuracy_to_csv,
    model_to_json,
    records_to_csv,
    run_accuracy_experiment,
    run_scatter_experiment,
    sample_latent_model,
    sample_triangle_model,
)

EXIT_INPUT = 2
EXIT_NUMERIC = 3
WORKERS_ENV = "LATENTSEARCH_WORKERS"
DEFAULT_INFER_RULE = "minoff:1:1"


class InputError(Exception):
    pass


class NumericalError(Exception):
    pass


def parse_range(text: str) -> list[float]:
    """``"b"`` -> [b]; ``"start:stop:count"`` -> count values, endpoints included."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) == 3:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError
            return [float(v) for v in np.linspace(start, stop, count)]
    except ValueError:
        pass
    raise InputError(f"bad range spec {text!r}; use a number or start:stop:count")


def parse_betas(value) -> list[float]:
    if isinstance(value, str):
        return parse_range(value)
    if isinstance(value, (int, float)):
        return [float(value)]
    return [float(v) for v in value]


def parse_alpha_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"bad --alpha {text!r}") from None


def _rule_or_theta(theta, rule):
    if theta is None and rule is None:
        rule = DEFAULT_INFER_RULE
    if rule is not None:
        try:
            return ThresholdRule.parse(rule)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    return float(theta)


def _check_finite(points):
    bad = [t for t in points if not (np.isfinite(t.cmi) and np.isfinite(t.entropy_z))]
    if bad:
        raise NumericalError(f"{len(bad)} runs produced non-finite results")


def _workers(args) -> int:
    if getattr(args, "workers", None) is not None:
        return args.workers
    return int(os.environ.get(WORKERS_ENV, "1"))


def _manifest_path(args, first_output: str) -> str:
    return args.manifest or f"{first_output}.manifest.json"


def _config_of(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "manifest")}


# --- subcommands ---------------------------------------------------------------

def cmd_search(args) -> list[str]:
    p = read_joint(args.joint)
    betas = parse_range(args.beta)
    cfg = SearchConfig(max_iters=args.iters, restarts=args.restarts, seed=args.seed)
    points = run_search_grid(p, args.k, betas, cfg).points
    _check_finite(points)
    Path(args.out).write_text(frontier_to_csv(points))
    outputs = [args.out]
    if args.trace:
        best = best_point(points)
        m, n = p.shape
        init = restart_init(args.k, m, n, args.seed, best.restart_id)
        _, trace = latent_search(p, args.k, replace(cfg, beta=best.beta), init=init)
        Path(args.trace).write_text(trace_to_csv(trace))
        outputs.append(args.trace)
    return outputs


def cmd_infer(args) -> list[str]:
    p = read_joint(args.joint)
    theta = _rule_or_theta(args.theta, args.theta_rule)
    cfg = InferGraphConfig(k=args.k, theta=theta, cmi_threshold=args.cmi_threshold,
                           restarts=args.restarts, betas=tuple(parse_range(args.betas)),
                           search=SearchConfig(max_iters=args.iters, seed=args.seed))
    verdict = infer_graph(p, cfg)
    text = verdict.to_json(cfg) + "\n"
    Path(args.out).write_text(text)
    sys.stdout.write(text)
    return [args.out]


def cmd_synth(args) -> list[str]:
    alphas = parse_alpha_list(args.alpha)
    sampler = sample_latent_model if args.graph == "latent" else sample_triangle_model
    rng = np.random.default_rng(args.seed)
    outputs = []
    for i in range(args.count):
        alpha = alphas if args.alpha_mode == "vector" else alphas[i % len(alphas)]
        model, joint, _ = sampler(args.m, args.n, args.k, alpha, rng)
        out = Path(args.out)
        model_out = Path(args.model_out) if args.model_out else out.with_name(out.stem + ".model.json")
        if args.count > 1:
            out = out.with_name(f"{out.stem}_{i:03d}{out.suffix}")
            model_out = model_out.with_name(f"{model_out.stem.replace('.model', '')}_{i:03d}.model.json")
        write_joint(joint, out)
        model_out.write_text(model_to_json(model))
        outputs += [str(out), str(model_out)]
    return outputs


def _experiment_cfg(conf: dict, k: int) -> InferGraphConfig:
    theta = conf.get("theta")
    if isinstance(theta, str):
        theta = ThresholdRule.parse(theta)
    return InferGraphConfig(
        k=k,
        theta=0.0 if theta is None else theta,
        cmi_threshold=float(conf.get("cmi_threshold", 1e-3)),
        restarts=int(conf.get("restarts", 40)),
        betas=tuple(parse_betas(conf.get("betas", list(DEFAULT_BETAS)))),
        search=SearchConfig(max_iters=int(conf.get("iters", 1000))),
    )


def _run_baselines(conf: dict) -> tuple[str, dict]:
    m, n, k = int(conf.get("m", 5)), int(conf.get("n", 5)), int(conf.get("k", 5))
    seed = int(conf.get("seed", 0))
    p = np.random.default_rng(seed).dirichlet(np.ones(m * n)).reshape(m, n)
    betas = parse_betas(conf.get("betas", [0.1]))
    steps = [float(s) for s in conf.get("gd_steps", [1e-3, 0.1])]
    gd_iters = int(conf.get("gd_iters", 10_000))
    ls_iters = int(conf.get("iters", 1000))
    rows, summary = [], {"latent_search": [], "gradient_descent": [], "nmf": [], "em": []}
    for r, beta in enumerate(betas):
        init = restart_init(k, m, n, seed, r)
        q, tr = latent_search(p, k, SearchConfig(beta=beta, max_iters=ls_iters), init=init)
        rows += [("latent_search", beta, r, *row[:4]) for row in tr.rows()]
        summary["latent_search"].append({"beta": beta, "restart_id": r, "iterations": tr.iterations_run,
                                         "residual": bl.latent_search_converged(p, q, beta)})
        for step in steps:
            qg, tg = bl.gradient_descent_search(p, k, beta, bl.BaselineConfig(step_size=step, max_iters=gd_iters),
                                                init=init)
            name = f"gradient_descent_{step:g}"
            rows += [(name, beta, r, *row[:4]) for row in tg.rows()]
            summary["gradient_descent"].append({
                "beta": beta, "restart_id": r, "step_size": step, "iterations": tg.iterations_run,
                "diverged": tg.diverged, "residual": bl.latent_search_converged(p, qg, beta)})
        f, em = bl.em_plsa(p, k, q, int(conf.get("em_iters", 300)))
        rows += [("em_after_latent_search", beta, r, i, c, c, h)
                 for i, (c, h) in enumerate(zip(em.cmi, em.entropy_z))]
        summary["em"].append({"beta": beta, "restart_id": r, "cmi": float(em.cmi[-1]),
                              "entropy_z": float(em.entropy_z[-1])})
    for kk in conf.get("nmf_ks", list(range(1, min(m, n) + 1))):
        U, V, res = bl.nmf_factorize(p, int(kk), bl.BaselineConfig(max_iters=int(conf.get("nmf_iters", 100))),
                                     rng=np.random.default_rng([seed, int(kk)]))
        hz, cmi = bl.nmf_latent_diagnostics(p, U, V)
        rows.append(("nmf", kk, 0, 0, cmi, cmi, hz))
        summary["nmf"].append({"k": kk, "l1_residual": res, "cmi": cmi, "entropy_z": hz})
    return comparison_to_csv(rows), summary


def cmd_experiment(args) -> list[str]:
    try:
        conf = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {args.config}: {exc}") from exc
    kind = conf.get("experiment")
    out = conf.get("out", f"{kind}.csv")
    seed = int(conf.get("seed", 0))
    workers = _workers(args)
    try:
        if kind == "scatter":
            ks = int(conf.get("k_search", conf.get("k_true", 10)))
            theta = conf.get("theta")
            theta = ThresholdRule.parse(theta) if isinstance(theta, str) else theta
            records = run_scatter_experiment(
                int(conf.get("m", 20)), int(conf.get("n", 20)), int(conf.get("k_true", 10)), ks,
                int(conf.get("samples_per_graph", 50)), conf.get("dirichlet_params", list(DEFAULT_DIRICHLET_PARAMS)),
                _experiment_cfg(conf, ks), seed=seed, theta=theta, workers=workers)
            Path(out).write_text(records_to_csv(records))
            return [out]
        if kind == "accuracy":
            rules = [ThresholdRule.parse(r) for r in conf.get("rules", ["const:2", "min:0.5", "minoff:1:1"])]
            rows = run_accuracy_experiment(
                [int(s) for s in conf.get("sizes", [4, 8, 16])], rules, int(conf.get("samples", 40)),
                lambda n: _experiment_cfg(conf, n), seed=seed,
                dirichlet_params=conf.get("dirichlet_params", list(DEFAULT_DIRICHLET_PARAMS)), workers=workers)
            Path(out).write_text(accuracy_to_csv(rows))
            return [out]
        if kind == "baselines":
            text, summary = _run_baselines(conf)
            Path(out).write_text(text)
            summary_path = conf.get("summary_out", str(Path(out).with_suffix(".summary.json")))
            Path(summary_path).write_text(json.dumps(summary, indent=2))
            return [out, summary_path]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad experiment config: {exc}") from exc
    raise InputError(f"unknown experiment kind {kind!r}; expected scatter, accuracy or baselines")


def cmd_skeleton(args) -> list[str]:
    columns = args.columns.split(",") if args.columns else None
    names = args.names.split(",") if args.names else None
    table = load_table(args.data, columns, args.missing, names)
    try:
        rule = ThresholdRule.parse(args.theta_rule)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    skel = recover_skeleton(table, rule, betas=parse_range(args.betas), restarts=args.restarts,
                            cmi_threshold=args.cmi_threshold, cfg=SearchConfig(max_iters=args.iters),
                            seed=args.seed)
    outputs = []
    for path, text in ((args.out_dot, skel.to_dot()), (args.out_json, skel.to_json()),
                       (args.out_csv, skel.to_csv())):
        if path:
            Path(path).write_text(text)
            outputs.append(path)
    if args.reference:
        diff = edge_diff(skel, load_edge_list(args.reference))
        report = args.out_diff or "skeleton_diff.json"
        Path(report).write_text(json.dumps(diff, indent=2))
        outputs.append(report)
    sys.stdout.write(skel.to_dot())
    return outputs


def cmd_replay(args) -> list[str]:
    try:
        manifest = json.loads(Path(args.manifest_file).read_text())
        argv = manifest["config"]["argv"]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot replay {args.manifest_file}: {exc}") from exc
    code = main(argv)
    if code:
        raise SystemExit(code)
    return []


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latentsearch",
                                 description="Entropic latent variable discovery for two discrete variables.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
        sp.add_argument("--manifest", help="manifest path (default: <first output>.manifest.json)")

    sp = sub.add_parser("search", help="run LatentSearch or a beta sweep on a joint file")
    sp.add_argument("joint", help="joint distribution file (.csv or .json)")
    sp.add_argument("--k", type=int, required=True, help="latent cardinality")
    sp.add_argument("--beta", default="0", help="beta value or start:stop:count range (default 0)")
    sp.add_argument("--iters", type=int, default=1000, help="iteration budget per run (default 1000)")
    sp.add_argument("--restarts", type=int, default=40, help="random restarts per beta (default 40)")
    sp.add_argument("--out", default="frontier.csv", help="frontier CSV (default frontier.csv)")
    sp.add_argument("--trace", help="also write the per-iteration trace of the best run to this CSV")
    common(sp)
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("infer", help="decide latent vs triangle graph for a joint file")
    sp.add_argument("joint")
    sp.add_argument("--k", type=int, required=True, help="latent cardinality to construct")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--theta", type=float, help="entropy threshold in bits")
    g.add_argument("--theta-rule", help='threshold rule: "const:C", "min:A" or "minoff:A:B" '
                                        f'(default {DEFAULT_INFER_RULE} when --theta is absent)')
    sp.add_argument("--cmi-threshold", type=float, default=1e-3, help="I(X;Y|Z) threshold T (default 0.001)")
    sp.add_argument("--restarts", type=int, default=40, help="restarts per beta (default 40)")
    sp.add_argument("--betas", default="0:0.025:6", help="beta grid (default 0:0.025:6)")
    sp.add_argument("--iters", type=int, default=1000, help="iterations per run (default 1000)")
    sp.add_argument("--out", default="verdict.json", help="verdict JSON (default verdict.json)")
    common(sp)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("synth", help="sample a latent or triangle model")
    sp.add_argument("--graph", choices=("latent", "triangle"), required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--alpha", default="1.0",
                    help="Dirichlet parameter(s) for p(z) (default 1.0); a comma list such as 1.0,0.5,0.2,0.1 "
                         "is spread over --count models as separate settings")
    sp.add_argument("--alpha-mode", choices=("partition", "vector"), default="partition",
                    help="treat a comma list as separate scalar settings or as one vector (default partition)")
    sp.add_argument("--count", type=int, default=1, help="number of models (default 1)")
    sp.add_argument("--out", default="joint.csv", help="joint file (.csv or .json)")
    sp.add_argument("--model-out", help="model JSON (default <out stem>.model.json)")
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("experiment", help="run a scatter, accuracy or baselines experiment from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("skeleton", help="recover a causal skeleton from a categorical CSV")
    sp.add_argument("--data", required=True)
    sp.add_argument("--columns", help="comma-separated subset of columns")
    sp.add_argument("--names", help="comma-separated column names for a header-less file")
    sp.add_argument("--missing", nargs="*", default=list(DEFAULT_MISSING),
                    help='missing-value tokens (default "?" and empty)')
    sp.add_argument("--theta-rule", default="min:0.8", help="threshold rule (default min:0.8)")
    sp.add_argument("--cmi-threshold", type=float, default=SKELETON_CMI_THRESHOLD,
                    help="I(X;Y|Z) threshold (default 0.0005)")
    sp.add_argument("--betas", default="0:0.025:100", help="beta grid (default 0:0.025:100)")
    sp.add_argument("--restarts", type=int, default=4, help="restarts per beta (default 4)")
    sp.add_argument("--iters", type=int, default=1000, help="iterations per run (default 1000)")
    sp.add_argument("--out-dot", default="skeleton.dot")
    sp.add_argument("--out-json", default="skeleton.json")
    sp.add_argument("--out-csv", help="per-pair threshold table CSV")
    sp.add_argument("--reference", help="edge list (a,b per line) to diff against")
    sp.add_argument("--out-diff", help="edge-diff report path (default skeleton_diff.json)")
    common(sp)
    sp.set_defaults(func=cmd_skeleton)

    sp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    sp.add_argument("manifest_file")
    sp.set_defaults(func=cmd_replay, manifest=None)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        outputs = args.func(args)
    except (InputError, JointFormatError, TableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.command != "replay" and outputs:
        config = _config_of(args)
        config["argv"] = argv
        write_manifest(_manifest_path(args, outputs[0]), args.command, config,
                       getattr(args, "seed", 0), time.perf_counter() - start, outputs)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
