"""Command-line entry point ``rmtlab``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import DomainError, PreconditionFailed, RmtlabError
from .localtree import build_tridiagonal, tridiag_extreme_eigs
from .model import ModelParams, WeightDistribution, degree_profile, make_params, read_graph, sample_graph, write_graph
from .nonbacktracking import ihara_bass_instance, loewner_lower_check, loewner_upper_check
from .pruning import prune, verify_pruned
from .spectra import match_outliers, predict_outliers, spectral_report
from .theory import (assumptions_check, classify_regime, critical_q_star, lambda_q,
                     lambda_q_inv, mp_edges, thresholds)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, tuple)):
        return list(o)
    return str(o)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=_json_default))


def _config(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config) if getattr(args, "config", None) else harness.ExperimentConfig()
    for name in ("gamma", "trials", "seed", "weights", "dense_limit", "out_dir", "workers"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "b", None):
        cfg.b = [float(x) for x in args.b]
    if getattr(args, "m", None):
        cfg.m = [int(x) for x in args.m]
    harness.ExperimentConfig(**cfg.to_dict())  # revalidate
    return cfg


def _graph(args):
    """Graph from ``--graph`` or sampled from the config/flags, plus its parameters."""
    cfg = _config(args)
    if getattr(args, "graph", None):
        g = read_graph(args.graph)
        return g, ModelParams.from_values(g.n, g.m, d=cfg.b[0] * math.log(g.N)), cfg
    params = make_params(cfg.gamma, cfg.m[0], cfg.b[0])
    return sample_graph(params, WeightDistribution(cfg.weights), cfg.seed), params, cfg


def _finish(cfg, command, args, checks, seeds=None) -> int:
    out = Path(cfg.out_dir)
    harness.write_manifest(out, command, {k: v for k, v in vars(args).items() if k != "func"}, cfg, seeds, checks)
    return 0 if all(checks.values()) else 1


def _plot(kind: str | None):
    if not kind or kind == "none":
        return None
    from . import plotting
    return plotting


def cmd_thresholds(args) -> int:
    if not args.gamma >= 1:
        raise DomainError("gamma must be at least 1")
    q = args.gamma ** 0.25
    th = thresholds(q)
    out = th.to_dict()
    out.update(gamma=args.gamma, q_star=critical_q_star(), mp_edges=list(mp_edges(q)))
    if args.b is not None:
        out["regime"] = classify_regime(args.b[0], q).__dict__
        out["assumptions"] = assumptions_check(args.b[0], q)
    _emit(out)
    return 0


def cmd_sample(args) -> int:
    g, params, cfg = _graph(args)
    path = Path(args.output)
    write_graph(g, path)
    _emit({"graph": str(path), "n": g.n, "m": g.m, "edges": g.num_edges, "hash": g.graph_hash(),
           "params": params.to_dict()})
    return _finish(cfg, "sample", args, {}, [cfg.seed])


def cmd_spectrum(args) -> int:
    g, params, cfg = _graph(args)
    rep = spectral_report(g, params, how=args.method, k=args.k, dense_limit=cfg.dense_limit)
    pred = predict_outliers(degree_profile(g, params), params)
    gaps = match_outliers(rep, pred)
    _emit({"sigma": rep.sigma, "bulk": rep.bulk, "xi": rep.xi, "window": rep.window,
           "outliers": {"right": rep.right_outliers, "left": rep.left_outliers},
           "gaps": {"right": gaps.right_gaps, "left": gaps.left_gaps}, "ks": rep.ks_distance,
           "graph_hash": rep.graph_hash, "converged": rep.converged})
    return _finish(cfg, "spectrum", args, {"solver_converged": rep.converged}, [cfg.seed])


def cmd_predict(args) -> int:
    g, params, cfg = _graph(args)
    pred = predict_outliers(degree_profile(g, params), params)
    _emit(pred.to_dict())
    return _finish(cfg, "predict", args, {}, [cfg.seed])


def cmd_emergence(args) -> int:
    cfg = _config(args)
    res = harness.emergence_experiment(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_csv(out / "emergence.csv", res["rows"])
    for b, (edges, counts) in res["histograms"].items():
        harness.write_histogram_csv(out / f"hist_b{b:g}.csv", edges, counts)
    with open(out / "trials.jsonl", "w") as fh:
        for b, recs in res["records"].items():
            for r in recs:
                fh.write(r.to_json() + "\n")
    plot = _plot(args.plot)
    if plot:
        plot.emergence_figure(res, cfg.gamma, out / f"emergence.{args.plot}")
    _emit(res["rows"])
    checks = {f"b={r['b']:g}:{r['check']}": r["pass"] for r in res["rows"]}
    return _finish(cfg, "emergence", args, checks, [cfg.seed])


def cmd_count_scaling(args) -> int:
    cfg = _config(args)
    res = harness.count_scaling_experiment(cfg, b=args.b_value)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_csv(out / "count_scaling.csv", res["rows"])
    (out / "count_scaling.json").write_text(json.dumps(res, indent=2, default=_json_default))
    plot = _plot(args.plot)
    if plot:
        plot.count_figure(res, out / f"count_scaling.{args.plot}")
    _emit(res)
    return _finish(cfg, "count-scaling", args, {"slope": res["pass"]}, [cfg.seed])


def cmd_phase_diagram(args) -> int:
    cfg = _config(args)
    qs = None
    if args.gammas:
        qs = [float(g) ** 0.25 for g in args.gammas]
    res = harness.phase_diagram(qs)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_csv(out / "phase_diagram.csv", res["rows"])
    plot = _plot(args.plot)
    if plot:
        plot.phase_figure(res, out / f"phase_diagram.{args.plot}")
    _emit({"q_star": res["q_star"], "rows": len(res["rows"]), "csv": str(out / "phase_diagram.csv")})
    return _finish(cfg, "phase-diagram", args, {"q_star": abs(res["q_star"] - 1.5084747) <= 1e-5})


def cmd_prune(args) -> int:
    g, params, cfg = _graph(args)
    pg = prune(g, params, radius_override=args.radius)
    rep = verify_pruned(pg, C=args.C)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = g.n
    rows = [{"stage": stage, "u": a, "v": b - n} for stage, es in (("H1", pg.removed_h1), ("H2", pg.removed_h2))
            for a, b in sorted(es)]
    harness.write_csv(out / "removed_edges.csv", rows)
    _emit(rep.to_dict())
    return _finish(cfg, "prune", args, {f"property_{k}": v for k, v in rep.properties.items()}, [cfg.seed])


def cmd_verify(args) -> int:
    cfg = _config(args)
    kind = args.what
    checks = {}
    if kind == "tridiag":
        q = cfg.gamma ** 0.25
        print("alpha,q,r,top,Lambda,gap")
        for a in args.alpha:
            side = args.side
            model = build_tridiagonal(q, a, args.r, side)
            ex = tridiag_extreme_eigs(model)
            if side == "V2" and a <= q * q - 1:
                val, lam, tol = ex["smallest_positive"], lambda_q(a, q), 1e-3
            else:
                lam = lambda_q(a, q) if side == "V2" else lambda_q_inv(a, q)
                val, tol = ex["top"], 1e-6
            gap = abs(val - lam)
            print(f"{a},{q},{args.r},{val:.12g},{lam:.12g},{gap:.3e}")
            checks[f"alpha={a}"] = gap <= tol
    elif kind == "ihara-bass":
        rng = np.random.default_rng(cfg.seed)
        worst, theta_ok = 0.0, True
        for _ in range(args.instances):
            res = ihara_bass_instance(rng.standard_normal((5, 3)) * 0.6)
            worst = max(worst, res["worst_scaled_det"])
            theta_ok &= res["theta_star"] <= res["rho"] + 1e-4
        checks = {"determinant": worst <= 1e-6, "theta_star": bool(theta_ok)}
        _emit({"worst_scaled_det": worst, "theta_star_ok": bool(theta_ok), "pass": all(checks.values())})
    elif kind == "loewner":
        g, params, _ = _graph(args)
        up = loewner_upper_check(g, params, C=args.C)
        try:
            low = loewner_lower_check(g, params, C=args.C).to_dict()
        except PreconditionFailed as exc:
            low = {"margin": None, "bound": None, "pass": False, "error": str(exc)}
        checks = {"upper": up.passed, "lower": bool(low["pass"])}
        _emit({"upper": up.to_dict(), "lower": low})
    elif kind == "pruned":
        g, params, _ = _graph(args)
        rep = verify_pruned(prune(g, params, radius_override=args.radius), C=args.C)
        checks = {f"property_{k}": v for k, v in rep.properties.items()}
        _emit(rep.to_dict())
    return _finish(cfg, f"verify {kind}", args, checks, [cfg.seed])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmtlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, graph=False):
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--b", nargs="+", type=float)
        sp.add_argument("--m", nargs="+", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--weights", choices=WeightDistribution.KINDS)
        sp.add_argument("--dense-limit", dest="dense_limit", type=int)
        sp.add_argument("--out-dir", dest="out_dir")
        sp.add_argument("--workers", type=int)
        if graph:
            sp.add_argument("--graph", help="graph file (header 'n m weighted', then 'u v [w]')")

    sp = sub.add_parser("thresholds", help="threshold functions as JSON")
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--b", nargs=1, type=float)
    sp.set_defaults(func=cmd_thresholds)

    sp = sub.add_parser("sample", help="sample a graph and write it to a file")
    common(sp)
    sp.add_argument("--output", "-o", required=True)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("spectrum", help="singular values, outliers and gaps")
    common(sp, graph=True)
    sp.add_argument("--method", default="auto", choices=("auto", "dense", "lanczos"))
    sp.add_argument("--k", type=int, default=6)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("predict", help="degree-based outlier prediction")
    common(sp, graph=True)
    sp.set_defaults(func=cmd_predict)

    for name, fn, text in (("emergence", cmd_emergence, "outlier emergence across b values"),
                           ("count-scaling", cmd_count_scaling, "growth of the predicted R2 count with N"),
                           ("phase-diagram", cmd_phase_diagram, "threshold curves over q")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.add_argument("--plot", choices=("none", "png", "svg"), default="none")
        sp.set_defaults(func=fn)
        if name == "count-scaling":
            sp.add_argument("--b-value", dest="b_value", type=float, help="defaults to the first b")
        if name == "phase-diagram":
            sp.add_argument("--gammas", nargs="+", type=float)

    sp = sub.add_parser("prune", help="pruned graph, removed edges and verification")
    common(sp, graph=True)
    sp.add_argument("--radius", type=int)
    sp.add_argument("--C", type=float, default=10.0)
    sp.set_defaults(func=cmd_prune)

    sp = sub.add_parser("verify", help="numerical checks")
    sp.add_argument("what", choices=("tridiag", "ihara-bass", "loewner", "pruned"))
    common(sp, graph=True)
    sp.add_argument("--alpha", nargs="+", type=float, default=[5.0, 1.0])
    sp.add_argument("--side", choices=("V1", "V2"), default="V2")
    sp.add_argument("--r", type=int, default=60)
    sp.add_argument("--instances", type=int, default=50)
    sp.add_argument("--radius", type=int)
    sp.add_argument("--C", type=float, default=10.0)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RmtlabError, ValueError, OSError) as exc:
        print(f"rmtlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
