"""Command-line front end.

Subcommands: sample, posterior, credible, confidence, critical-n, curve,
conditions, coverage, mcmc, early-stop. Stochastic commands require --seed
and are deterministic given it. Output goes to --out or stdout; --format
selects csv or json where both make sense. Computation errors exit with
code 1 and a JSON error object on stderr; usage errors exit with code 2.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from contextlib import contextmanager

import numpy as np

from . import core, credconf, experiments, mcmc, posterior

_MODE = {"exact": credconf.EXACT, "almost": credconf.ALMOST, "plan": "plan"}
_CRITERION = {"literal": credconf.LITERAL, "half-level": credconf.HALF_LEVEL}


@contextmanager
def _out_stream(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="\n") as f:
            yield f


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _emit_json(stream, payload) -> None:
    json.dump(experiments.round_floats(payload), stream, indent=2)
    stream.write("\n")


def _parse_fractions(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(float(tok)) for tok in text.split(",") if tok.strip()]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_sample(args) -> int:
    params = core.SbmParams(args.p, args.q)
    if args.truth:
        truth = core.read_assignment(args.truth)
        if args.n is not None and truth.n != args.n:
            raise ValueError("--n disagrees with the truth file")
    else:
        if args.n is None:
            raise ValueError("sample needs --n or --truth")
        truth = core.balanced_assignment(args.n, args.m)
    graph = core.sample_graph(params, truth, args.seed)
    with _out_stream(args.out) as f:
        core.write_graph(graph, f)
    return 0


def _posterior_rows(table: posterior.PosteriorTable) -> list[dict]:
    masses = table.masses
    return [
        {
            "index": i,
            "labels": table.assignment_at(i).to_string(),
            "mass": float(masses[i]),
            "log_mass": float(table.log_mass[i]),
        }
        for i in range(table.size)
    ]


def cmd_posterior(args) -> int:
    graph = core.read_graph(args.graph)
    if args.n is not None and graph.n != args.n:
        raise ValueError("--n disagrees with the graph file")
    table = posterior.enumerate_posterior(
        graph, core.SbmParams(args.p, args.q), n_max=args.n_max
    )
    rows = _posterior_rows(table)
    with _out_stream(args.out) as f:
        if args.format == "json":
            _emit_json(f, {"n": table.n, "log_norm": table.log_norm, "entries": rows})
        else:
            experiments.write_csv_rows(f, rows)
    return 0


def cmd_credible(args) -> int:
    graph = core.read_graph(args.graph)
    table = posterior.enumerate_posterior(
        graph, core.SbmParams(args.p, args.q), n_max=args.n_max
    )
    cred = credconf.credible_set(table, args.level)
    masses = table.masses
    rows = []
    cum = 0.0
    for rank, idx in enumerate(cred.member_indices, start=1):
        cum += float(masses[idx])
        rows.append({
            "rank": rank,
            "index": int(idx),
            "labels": table.assignment_at(int(idx)).to_string(),
            "mass": float(masses[idx]),
            "cumulative": cum,
        })
    with _out_stream(args.out) as f:
        if args.format == "json":
            _emit_json(f, {
                "n": cred.n,
                "target_level": cred.target_level,
                "achieved_mass": cred.achieved_mass,
                "members": rows,
            })
        else:
            experiments.write_csv_rows(f, rows)
    return 0


def cmd_confidence(args) -> int:
    mode = _MODE[args.mode]
    if mode == "plan":
        grid = _parse_fractions(args.a_grid) if args.a_grid else [0.05, 0.1, 0.25]
        report = credconf.plan_strategy(args.n, args.p, args.q, args.alpha, grid)
    else:
        a = args.a
        level = credconf.required_level(args.n, args.p, args.q, args.alpha, mode, a)
        report = credconf.ConfidenceReport(
            mode=mode,
            a=a,
            required_level=level,
            confidence_floor=credconf.floor_at_required_level(
                args.n, args.p, args.q, args.alpha, level, mode, a),
            enlargement_radius=0 if mode == credconf.EXACT
            else credconf.enlargement_radius(a, args.n),
            critical_n=credconf.critical_n(args.p, args.q, args.alpha, mode, a),
            identifiable=args.p != args.q,
        )
    payload = {"n": args.n, "p": args.p, "q": args.q, "alpha": args.alpha,
               **report.to_dict()}
    with _out_stream(args.out) as f:
        if args.format == "csv":
            experiments.write_csv_rows(f, [payload])
        else:
            _emit_json(f, payload)
    return 0


def cmd_critical_n(args) -> int:
    mode = _MODE[args.mode]
    if mode == "plan":
        raise ValueError("critical-n needs --mode exact or almost")
    a = args.a
    values = {
        crit: credconf.critical_n(args.p, args.q, args.alpha, mode, a,
                                  criterion=internal, n_cap=args.n_cap)
        for crit, internal in (("literal", credconf.LITERAL),
                               ("half_level", credconf.HALF_LEVEL))
    }
    selected = values["literal" if args.criterion == "literal" else "half_level"]
    with _out_stream(args.out) as f:
        if args.format == "json":
            _emit_json(f, {"p": args.p, "q": args.q, "alpha": args.alpha,
                           "mode": mode, "a": a, "criterion": args.criterion,
                           "selected": selected, **values})
        else:
            f.write(("not-found" if selected is None else str(selected)) + "\n")
    return 0


def emit_curve(p: float, q: float, alpha: float, mode: str, n_range: range,
               a: float | None = None) -> tuple[list[dict], dict]:
    """Required-level rows per graph size, plus critical-size metadata."""
    rows = [
        {
            "n": n,
            "required_level": credconf.required_level(n, p, q, alpha, mode, a),
            "mode": mode,
            "p": p,
            "q": q,
            "alpha": alpha,
            "a": "" if a is None else a,
        }
        for n in n_range
    ]
    meta = {
        "critical_n_literal": credconf.critical_n(p, q, alpha, mode, a,
                                                  criterion=credconf.LITERAL),
        "critical_n_half_level": credconf.critical_n(p, q, alpha, mode, a,
                                                     criterion=credconf.HALF_LEVEL),
        "note": ("levels include the exp(n rho^(n/2)) correction factor; "
                 "a common leading-order variant omits it"),
    }
    return rows, meta


def cmd_curve(args) -> int:
    mode = _MODE[args.mode]
    if mode == "plan":
        raise ValueError("curve needs --mode exact or almost")
    if args.n_min < 2 or args.n_max_range < args.n_min:
        raise ValueError("need 2 <= n-min <= n-max")
    rows, meta = emit_curve(args.p, args.q, args.alpha, mode,
                            range(args.n_min, args.n_max_range + 1), args.a)
    with _out_stream(args.out) as f:
        if args.format == "json":
            _emit_json(f, {"metadata": meta, "rows": rows})
        else:
            for key in ("critical_n_literal", "critical_n_half_level"):
                f.write(f"# {key}={meta[key]}\n")
            experiments.write_csv_rows(
                f, rows, ["n", "required_level", "mode", "p", "q", "alpha", "a"])
    return 0


def cmd_conditions(args) -> int:
    ns = _parse_ints(args.n_grid) if args.n_grid else [args.n]
    if not ns or any(n is None for n in ns):
        raise ValueError("conditions needs --n or --n-grid")
    rows = [
        {
            "kind": args.kind,
            "n": n,
            "coeff1": args.coeff1,
            "coeff2": args.coeff2,
            "value": credconf.condition_value(
                args.kind, args.coeff1, args.coeff2, n, a=args.a, big_c=args.big_c),
        }
        for n in ns
    ]
    with _out_stream(args.out) as f:
        if args.format == "json":
            _emit_json(f, {"rows": rows})
        else:
            experiments.write_csv_rows(f, rows)
    return 0


def cmd_coverage(args) -> int:
    result = experiments.coverage_experiment(
        args.n, args.p, args.q, args.alpha,
        strategy=_MODE[args.mode], a=args.a,
        a_grid=_parse_fractions(args.a_grid) if args.a_grid else None,
        random_m=args.random_m,
        replicates=args.reps, seed=args.seed,
        n_max=args.n_max, threads=args.threads,
    )
    with _out_stream(args.out) as f:
        if args.format == "csv":
            row = {k: v for k, v in result.to_dict().items() if k != "config"}
            experiments.write_csv_rows(f, [row])
        else:
            _emit_json(f, result.to_dict())
    return 0


def cmd_mcmc(args) -> int:
    graph = core.read_graph(args.graph)
    params = core.SbmParams(args.p, args.q)
    config = mcmc.ChainConfig(steps=args.steps, burn_in=args.burn_in,
                              thin=args.thin, seed=args.seed)
    if args.trace_out:
        with open(args.trace_out, "w", newline="\n") as f:
            mcmc.dump_chain_csv(f, graph, params, config)
    emp = mcmc.run_chain(graph, params, config)
    top = sorted(emp.counts.items(), key=lambda kv: (-kv[1], kv[0]))[:args.top]
    rows = [
        {
            "index": idx,
            "labels": posterior.assignment_from_index(emp.n, idx).to_string(),
            "count": count,
            "frequency": count / emp.total,
        }
        for idx, count in top
    ]
    payload = {
        "n": emp.n, "total": emp.total, "distinct_states": len(emp.counts),
        "steps": config.steps, "burn_in": config.burn_in, "thin": config.thin,
        "seed": args.seed, "top": rows,
    }
    if args.compare_exact:
        table = posterior.enumerate_posterior(graph, params, n_max=args.n_max)
        payload["tv_to_exact"] = mcmc.tv_distance(emp, table)
    with _out_stream(args.out) as f:
        if args.format == "csv":
            experiments.write_csv_rows(f, rows)
        else:
            _emit_json(f, payload)
    return 0


def cmd_early_stop(args) -> int:
    rows = experiments.early_stopping_study(
        args.n, args.p, args.q, args.alpha,
        _parse_ints(args.lengths),
        strategy=_MODE[args.mode], a=args.a,
        replicates=args.reps, seed=args.seed,
        thin=args.thin, n_max=args.n_max, threads=args.threads,
    )
    dicts = [r.to_dict() for r in rows]
    with _out_stream(args.out) as f:
        if args.format == "csv":
            experiments.write_csv_rows(f, dicts)
        else:
            _emit_json(f, {"n": args.n, "p": args.p, "q": args.q,
                           "alpha": args.alpha, "seed": args.seed, "rows": dicts})
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbmcred",
        description="Two-community stochastic block model posteriors and "
                    "credible-to-confidence set conversion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, fmt_default="csv"):
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--format", choices=["csv", "json"], default=fmt_default)

    def add_pq(p):
        p.add_argument("--p", type=float, required=True)
        p.add_argument("--q", type=float, required=True)

    sp = sub.add_parser("sample", help="draw a graph and write it as text")
    add_pq(sp)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--m", type=int, default=None, help="size of the 1-community")
    sp.add_argument("--truth", default=None, help="assignment file for the truth")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_sample)

    pp = sub.add_parser("posterior", help="exact posterior table for a graph")
    add_pq(pp)
    pp.add_argument("--graph", required=True)
    pp.add_argument("--n", type=int, default=None, help="expected vertex count")
    pp.add_argument("--n-max", type=int, default=posterior.N_MAX_DEFAULT)
    add_common(pp)
    pp.set_defaults(func=cmd_posterior)

    cp = sub.add_parser("credible", help="credible set at a given level")
    add_pq(cp)
    cp.add_argument("--graph", required=True)
    cp.add_argument("--level", type=float, required=True)
    cp.add_argument("--n-max", type=int, default=posterior.N_MAX_DEFAULT)
    add_common(cp)
    cp.set_defaults(func=cmd_credible)

    cf = sub.add_parser("confidence", help="required level and confidence floor")
    add_pq(cf)
    cf.add_argument("--n", type=int, required=True)
    cf.add_argument("--alpha", type=float, required=True)
    cf.add_argument("--mode", choices=["exact", "almost", "plan"], default="exact")
    cf.add_argument("--a", type=float, default=None)
    cf.add_argument("--a-grid", default=None, help="comma list of fractions for plan mode")
    add_common(cf, fmt_default="json")
    cf.set_defaults(func=cmd_confidence)

    cn = sub.add_parser("critical-n", help="smallest adequate graph size")
    add_pq(cn)
    cn.add_argument("--alpha", type=float, required=True)
    cn.add_argument("--mode", choices=["exact", "almost"], default="exact")
    cn.add_argument("--a", type=float, default=None)
    cn.add_argument("--criterion", choices=["literal", "half-level"], default="literal")
    cn.add_argument("--n-cap", type=int, default=10 ** 6)
    add_common(cn)
    cn.set_defaults(func=cmd_critical_n)

    cv = sub.add_parser("curve", help="required credible level vs graph size")
    add_pq(cv)
    cv.add_argument("--alpha", type=float, required=True)
    cv.add_argument("--mode", choices=["exact", "almost"], default="exact")
    cv.add_argument("--a", type=float, default=None)
    cv.add_argument("--n-min", type=int, required=True)
    cv.add_argument("--n-max", type=int, required=True, dest="n_max_range")
    add_common(cv)
    cv.set_defaults(func=cmd_curve)

    cd = sub.add_parser("conditions", help="asymptotic condition values")
    cd.add_argument("--kind", choices=list(credconf.CONDITION_KINDS), required=True)
    cd.add_argument("--coeff1", type=float, required=True)
    cd.add_argument("--coeff2", type=float, required=True)
    cd.add_argument("--n", type=int, default=None)
    cd.add_argument("--n-grid", default=None, help="comma list of graph sizes")
    cd.add_argument("--a", type=float, default=None)
    cd.add_argument("--big-c", type=float, default=None)
    add_common(cd)
    cd.set_defaults(func=cmd_conditions)

    co = sub.add_parser("coverage", help="Monte Carlo coverage experiment")
    add_pq(co)
    co.add_argument("--n", type=int, required=True)
    co.add_argument("--alpha", type=float, required=True)
    co.add_argument("--mode", choices=["exact", "almost", "plan"], default="exact")
    co.add_argument("--a", type=float, default=None)
    co.add_argument("--a-grid", default=None)
    co.add_argument("--reps", type=int, default=500)
    co.add_argument("--seed", type=int, required=True)
    co.add_argument("--random-m", action="store_true")
    co.add_argument("--n-max", type=int, default=posterior.N_MAX_DEFAULT)
    co.add_argument("--threads", type=int, default=1)
    add_common(co, fmt_default="json")
    co.set_defaults(func=cmd_coverage)

    mc = sub.add_parser("mcmc", help="Metropolis chain over labelings")
    add_pq(mc)
    mc.add_argument("--graph", required=True)
    mc.add_argument("--steps", type=int, required=True)
    mc.add_argument("--burn-in", type=int, default=None)
    mc.add_argument("--thin", type=int, default=1)
    mc.add_argument("--seed", type=int, required=True)
    mc.add_argument("--top", type=int, default=20)
    mc.add_argument("--trace-out", default=None, help="CSV chain dump")
    mc.add_argument("--compare-exact", action="store_true")
    mc.add_argument("--n-max", type=int, default=posterior.N_MAX_DEFAULT)
    add_common(mc, fmt_default="json")
    mc.set_defaults(func=cmd_mcmc)

    es = sub.add_parser("early-stop", help="coverage vs chain length study")
    add_pq(es)
    es.add_argument("--n", type=int, required=True)
    es.add_argument("--alpha", type=float, required=True)
    es.add_argument("--mode", choices=["exact", "almost", "plan"], default="exact")
    es.add_argument("--a", type=float, default=None)
    es.add_argument("--lengths", required=True, help="comma list of chain lengths")
    es.add_argument("--reps", type=int, default=100)
    es.add_argument("--seed", type=int, required=True)
    es.add_argument("--thin", type=int, default=1)
    es.add_argument("--n-max", type=int, default=posterior.N_MAX_DEFAULT)
    es.add_argument("--threads", type=int, default=1)
    add_common(es, fmt_default="json")
    es.set_defaults(func=cmd_early_stop)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
