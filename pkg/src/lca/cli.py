"""Experiment harness and command-line entry point.

Subcommands: mis, mis-sweep, mm, amis, amm, r-dist, component-stats,
verify, repro.  Every run is a pure function of its RunConfig; manifests
(JSON-serialized configs) reproduce output byte-for-byte.  CSV files carry
a schema tag in row 1 and contain no timestamps; the JSON/text report
isolates the timestamp to a single field/line.

Exit codes: 0 success, 1 verification failure, 2 usage/validation error,
3 algorithmic failure (component over cap, Phase-1 ERROR).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import approx_matching as amm_mod
from . import greedy_local, matching, verify, weak_mis
from .errors import ComponentTooLargeError, GraphLoadError, PhaseOneError, UsageError
from .graph import GraphStore, gen_graph, load_graph
from .oracle import BaseOracle
from .prand import SeedBundle
from .weak_mis import NO, YES

DEFAULT_SEED = "1234abcd"


@dataclass
class RunConfig:
    command: str
    graph: str | None = None
    gen: str | None = None
    gen_seed: int = 0
    seed: str = DEFAULT_SEED
    d: int | None = None
    d_list: list[int] = field(default_factory=list)
    eps: float = 0.2
    delta: float = 0.1
    c1: float = 4.0
    c2: float = 4.0
    c_m: float = 1.0
    ell: int | None = None
    k: int | None = None
    bit_k: int | None = None
    cap_scale: float = 1.0
    reps: int = 1
    samples: int = 100000
    queries: int = 16
    method: str = "israeli-itai"
    out: str | None = None
    format: str = "csv"
    emit_answers: bool = False
    answers: str | None = None
    kind: str = "mis"
    manifest_out: str | None = None

    def to_manifest(self) -> str:
        return json.dumps({"schema": "lca.manifest.v1", "config": asdict(self)},
                          indent=2, sort_keys=True)

    @classmethod
    def from_manifest(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        if data.get("schema") != "lca.manifest.v1":
            raise UsageError("not a lca.manifest.v1 file")
        return cls(**data["config"])


def parse_gen_spec(spec: str) -> dict:
    """'kind:key=val,key=val' -> kwargs for gen_graph."""
    kind, _, rest = spec.partition(":")
    out: dict = {"kind": kind}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not _:
                raise UsageError(f"bad gen parameter {item!r} (want key=val)")
            key = key.strip()
            val = val.strip()
            if key in ("n", "d", "rows", "cols", "gen_seed"):
                out[key] = int(val)
            elif key == "p":
                out[key] = float(val)
            else:
                raise UsageError(f"unknown gen parameter {key!r}")
    return out


def build_graph(config: RunConfig, d_override: int | None = None) -> GraphStore:
    if config.graph and config.gen:
        raise UsageError("give either --graph or --gen, not both")
    if config.graph:
        with open(config.graph, "r", encoding="utf-8") as fh:
            return load_graph(fh.read())
    if config.gen:
        kw = parse_gen_spec(config.gen)
        kw.setdefault("gen_seed", config.gen_seed)
        if d_override is not None:
            kw["d"] = d_override
        return gen_graph(**kw)
    raise UsageError("a graph source is required (--graph or --gen)")


def derive_rep_seed(seed_hex: str, label: str) -> str:
    h = hashlib.sha256(f"{seed_hex}/{label}".encode()).hexdigest()
    return h[:64]


# ---------------------------------------------------------------------------
# Output plumbing.


def write_csv(path_or_buf, schema: str, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([schema])
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    text = buf.getvalue()
    if path_or_buf:
        with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def emit_report(config: RunConfig, report: dict, csv_payload: str | None) -> None:
    if config.format == "json":
        payload = dict(report)
        payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        print(f"# generated_at {time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime())}")
        for key in sorted(report):
            print(f"{key}: {report[key]}")
    if csv_payload is not None and not config.out:
        sys.stdout.write(csv_payload)
    if config.manifest_out:
        with open(config.manifest_out, "w", encoding="utf-8") as fh:
            fh.write(config.to_manifest())


def _query_stats_sample(store: GraphStore, params, tape, queries: int) -> dict:
    """Honest per-query costs on a deterministic vertex sample."""
    if store.n == 0 or queries <= 0:
        return {"queries_mean": 0.0, "queries_max": 0, "normalized_mean": 0.0}
    if store.n <= queries:
        ids = list(range(1, store.n + 1))
    else:
        step = (store.n - 1) / (queries - 1) if queries > 1 else 1
        ids = sorted({1 + round(t * step) for t in range(queries)})
    base = BaseOracle(store)
    totals = []
    normalized = []
    for v in ids:
        ctx = weak_mis.MisRunContext(base, params, tape)
        _, stats = ctx.query(v)
        totals.append(stats.oracle_queries())
        normalized.append(stats.normalized_queries(params.d))
    return {
        "queries_mean": float(np.mean(totals)),
        "queries_max": int(max(totals)),
        "normalized_mean": float(np.mean(normalized)),
    }


# ---------------------------------------------------------------------------
# Subcommand implementations.


def cmd_mis(config: RunConfig) -> int:
    store = build_graph(config, d_override=config.d)
    bundle = SeedBundle(config.seed)
    params, tape = weak_mis.make_mis_run(
        store, bundle, d=config.d, c1=config.c1, cap_scale=config.cap_scale,
        bit_k=config.bit_k)
    result = weak_mis.mis_full_run(store, params, tape)
    verdict = verify.verify_mis(store, result.yes_set)
    stats = _query_stats_sample(store, params, tape, config.queries)
    report = {
        "n": store.n, "d": params.d, "m": store.m, "seed": bundle.master_hex,
        "iterations": params.iterations, "stages": params.stages,
        "component_cap": params.component_cap,
        "mis_size": len(result.yes_set),
        "max_component": result.max_component,
        "valid": bool(verdict),
        "seed_bits": bundle.audit.total_bits(),
        **stats,
    }
    csv_payload = None
    if config.emit_answers:
        rows = [[v, "YES" if v in result.yes_set else "NO"]
                for v in range(1, store.n + 1)]
        csv_payload = write_csv(config.out, "lca.mis-answers.v1",
                                ["vertex", "answer"], rows)
    emit_report(config, report, csv_payload)
    return 0 if verdict else 1


def cmd_mis_sweep(config: RunConfig) -> int:
    d_values = config.d_list or ([config.d] if config.d is not None else [4, 8, 16])
    jobs = [(d, rep) for d in d_values for rep in range(config.reps)]
    rows = []
    errors = 0
    for d, rep in jobs:
        row, err = _sweep_one(config, d, rep)
        rows.append(row)
        errors += err
    rows.sort(key=lambda r: (r[1], r[2]))
    payload = write_csv(config.out, "lca.mis-sweep.v1",
                        ["n", "d", "seed", "max_component", "queries_mean",
                         "queries_max", "valid"], rows)
    emit_report(config, {"rows": len(rows), "errors": errors}, payload)
    return 0


def _sweep_one(config: RunConfig, d: int, rep: int) -> tuple[list, int]:
    seed = derive_rep_seed(config.seed, f"d={d}/rep={rep}")
    store = build_graph(config, d_override=d)
    bundle = SeedBundle(seed)
    params, tape = weak_mis.make_mis_run(store, bundle, d=d, c1=config.c1,
                                         cap_scale=config.cap_scale,
                                         bit_k=config.bit_k)
    try:
        result = weak_mis.mis_full_run(store, params, tape)
    except ComponentTooLargeError:
        return [store.n, d, seed, "ERROR", "", "", ""], 1
    verdict = verify.verify_mis(store, result.yes_set)
    stats = _query_stats_sample(store, params, tape, config.queries)
    return [store.n, d, seed, result.max_component,
            f"{stats['queries_mean']:.2f}", stats["queries_max"],
            "true" if verdict else "false"], 0


def cmd_mm(config: RunConfig) -> int:
    store = build_graph(config, d_override=config.d)
    bundle = SeedBundle(config.seed)
    if config.method == "line-graph":
        edges = matching.mm_via_line_graph_all(store, bundle, c1=config.c1,
                                               cap_scale=config.cap_scale,
                                               bit_k=config.bit_k)
        extra = {}
    else:
        params, tape = matching.make_mm_run(store, bundle, d=config.d,
                                            c2=config.c2, c_m=config.c_m,
                                            cap_scale=config.cap_scale,
                                            bit_k=config.bit_k)
        result = matching.mm_full_run(store, params, tape)
        edges = result.matching
        extra = {"max_component": result.max_component,
                 "iterations": params.iterations,
                 "component_cap": params.component_cap}
    verdict = verify.verify_matching(store, edges, maximal=True)
    report = {
        "n": store.n, "m": store.m, "seed": bundle.master_hex,
        "method": config.method, "matching_size": len(edges),
        "valid_maximal": bool(verdict),
        "seed_bits": bundle.audit.total_bits(),
        **extra,
    }
    csv_payload = None
    if config.emit_answers:
        chosen = {tuple(sorted(e)) for e in edges}
        rows = [[u, v, "YES" if (u, v) in chosen else "NO"] for u, v in store.edges()]
        csv_payload = write_csv(config.out, "lca.mm-answers.v1",
                                ["u", "v", "answer"], rows)
    emit_report(config, report, csv_payload)
    return 0 if verdict else 1


def cmd_amis(config: RunConfig) -> int:
    store = build_graph(config, d_override=config.d)
    bundle = SeedBundle(config.seed)
    d = config.d if config.d is not None else store.d
    params = greedy_local.AmisParams.derive(store.n, store.m, d, config.eps,
                                            delta=config.delta, ell=config.ell)
    result = greedy_local.amis_full_run(store, params, bundle)
    subset_ok = result.yes_set <= result.greedy_set
    indep_ok = bool(verify.verify_mis(store, result.greedy_set))
    report = {
        "n": store.n, "m": store.m, "d": d, "eps": config.eps,
        "delta": config.delta, "seed": bundle.master_hex,
        "draw_index": result.good.draw_index, "ell": result.good.ell,
        "p_tilde": result.good.p_tilde,
        "sample_size": params.sample_size, "trials": params.trials,
        "yes_size": len(result.yes_set), "greedy_size": len(result.greedy_set),
        "ratio": result.ratio, "truncated": result.truncated,
        "subset_ok": subset_ok, "greedy_is_mis": indep_ok,
        "target_ratio": 1 - config.eps,
        "seed_bits": bundle.audit.total_bits(),
    }
    csv_payload = None
    if config.emit_answers:
        rows = [[v, "YES" if v in result.yes_set else "NO"]
                for v in range(1, store.n + 1)]
        csv_payload = write_csv(config.out, "lca.amis-answers.v1",
                                ["vertex", "answer"], rows)
    emit_report(config, report, csv_payload)
    ok = subset_ok and indep_ok and result.ratio >= 1 - config.eps
    return 0 if ok else 1


def cmd_amm(config: RunConfig) -> int:
    store = build_graph(config, d_override=config.d)
    bundle = SeedBundle(config.seed)
    d = config.d if config.d is not None else store.d
    if config.k is not None and config.k > 4:
        raise UsageError("k is capped at 4 (the recursion cost grows as d^(2k))")
    params = amm_mod.AmmParams.derive(store.n, store.m, d, config.eps,
                                      delta=config.delta, k=config.k,
                                      ell=config.ell)
    result = amm_mod.amm_full_run(store, params, bundle)
    verdict = verify.verify_matching(store, result.yes_edges)
    report = {
        "n": store.n, "m": store.m, "d": d, "eps": config.eps, "k": params.k,
        "seed": bundle.master_hex,
        "draw_index": result.good.draw_index, "ell": result.good.ell,
        "p_tilde": result.good.p_tilde,
        "matching_size": len(result.yes_edges),
        "truncated_edges": result.truncated_edges,
        "valid_matching": bool(verdict),
        "theory_budget_shape": params.theory_t_shape,
        "seed_bits": bundle.audit.total_bits(),
    }
    if store.n <= verify.MAX_MATCHING_GUARD:
        opt, _ = verify.max_matching_exact(store)
        report["max_matching"] = opt
        report["ratio"] = len(result.yes_edges) / opt if opt else 1.0
    csv_payload = None
    if config.emit_answers:
        chosen = result.yes_edges
        rows = [[u, v, "YES" if (u, v) in chosen else "NO"] for u, v in store.edges()]
        csv_payload = write_csv(config.out, "lca.amm-answers.v1",
                                ["u", "v", "answer"], rows)
    emit_report(config, report, csv_payload)
    return 0 if verdict else 1


def cmd_r_dist(config: RunConfig) -> int:
    store = build_graph(config, d_override=config.d)
    bundle = SeedBundle(config.seed)
    stat = greedy_local.r_statistic(store, bundle, config.samples)
    rows = [[store.n, store.m, f"{store.m / store.n:.4f}", stat.samples,
             f"{stat.mean:.6f}", f"{stat.std_error:.6f}", f"{stat.bound:.6f}",
             "true" if stat.within_bound() else "false"]]
    payload = write_csv(config.out, "lca.r-dist.v1",
                        ["n", "m", "m_over_n", "samples", "mean", "std_error",
                         "bound", "within_bound"], rows)
    emit_report(config, {"mean": stat.mean, "bound": stat.bound,
                         "std_error": stat.std_error}, payload)
    return 0


def cmd_component_stats(config: RunConfig) -> int:
    store = build_graph(config, d_override=config.d)
    bundle = SeedBundle(config.seed)
    params, tape = weak_mis.make_mis_run(store, bundle, d=config.d, c1=config.c1,
                                         cap_scale=config.cap_scale,
                                         bit_k=config.bit_k)
    trace = weak_mis.global_weak_mis(store, params, tape)
    hist = verify.components(store, trace.residual_active())
    rows = [[size, count] for size, count in sorted(hist.items())]
    payload = write_csv(config.out, "lca.component-stats.v1",
                        ["size", "count"], rows)
    emit_report(config, {"residual_vertices": len(trace.residual_active()),
                         "component_cap": params.component_cap,
                         "max_component": max(hist) if hist else 0}, payload)
    return 0


def cmd_verify(config: RunConfig) -> int:
    store = build_graph(config, d_override=config.d)
    if not config.answers:
        raise UsageError("verify needs --answers CSV")
    with open(config.answers, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    # skip schema/header rows when present
    data = [r for r in rows if r[-1].upper() in ("YES", "NO")]
    if config.kind == "mis":
        chosen = {int(r[0]) for r in data if r[-1].upper() == "YES"}
        verdict = verify.verify_mis(store, chosen)
    elif config.kind == "matching":
        edges = {(int(r[0]), int(r[1])) for r in data if r[-1].upper() == "YES"}
        verdict = verify.verify_matching(store, edges, maximal=True)
    else:
        raise UsageError(f"unknown verify kind {config.kind!r}")
    emit_report(config, {"kind": config.kind, "pass": bool(verdict),
                         "witness": verdict.witness, "reason": verdict.reason}, None)
    return 0 if verdict else 1


def cmd_repro(config: RunConfig) -> int:
    if not config.graph:
        raise UsageError("repro needs the manifest path as --graph MANIFEST")
    with open(config.graph, "r", encoding="utf-8") as fh:
        inner = RunConfig.from_manifest(fh.read())
    if config.out:
        inner.out = config.out
    return DISPATCH[inner.command](inner)


DISPATCH = {
    "mis": cmd_mis,
    "mis-sweep": cmd_mis_sweep,
    "mm": cmd_mm,
    "amis": cmd_amis,
    "amm": cmd_amm,
    "r-dist": cmd_r_dist,
    "component-stats": cmd_component_stats,
    "verify": cmd_verify,
    "repro": cmd_repro,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lca",
        description="Local computation algorithms for MIS and matching.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DISPATCH:
        p = sub.add_parser(name)
        p.add_argument("--graph", help="graph file (or manifest for repro)")
        p.add_argument("--gen", help="generator spec kind:k=v,... "
                                     "(gnp-capped, random-d-regular, path, cycle, grid, star)")
        p.add_argument("--gen-seed", type=int, default=0, dest="gen_seed")
        p.add_argument("--seed", default=DEFAULT_SEED, help="master seed (hex, <= 256 bits)")
        p.add_argument("--d", type=str, default=None,
                       help="degree bound; comma list sweeps (mis-sweep)")
        p.add_argument("--eps", type=float, default=0.2)
        p.add_argument("--delta", type=float, default=0.1)
        p.add_argument("--c1", type=float, default=4.0)
        p.add_argument("--c2", type=float, default=4.0)
        p.add_argument("--c-m", type=float, default=1.0, dest="c_m")
        p.add_argument("--ell", type=int, default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--bit-k", type=int, default=None, dest="bit_k")
        p.add_argument("--cap-scale", type=float, default=1.0, dest="cap_scale")
        p.add_argument("--reps", type=int, default=1)
        p.add_argument("--samples", type=int, default=100000)
        p.add_argument("--queries", type=int, default=16,
                       help="per-query stat sample size")
        p.add_argument("--method", choices=["israeli-itai", "line-graph"],
                       default="israeli-itai")
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--emit-answers", action="store_true", dest="emit_answers")
        p.add_argument("--answers", default=None)
        p.add_argument("--kind", choices=["mis", "matching"], default="mis")
        p.add_argument("--manifest-out", default=None, dest="manifest_out")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    d = None
    d_list: list[int] = []
    if args.d is not None:
        parts = [p for p in str(args.d).split(",") if p]
        if len(parts) == 1:
            d = int(parts[0])
        else:
            d_list = [int(p) for p in parts]
    return RunConfig(
        command=args.command, graph=args.graph, gen=args.gen,
        gen_seed=args.gen_seed, seed=args.seed, d=d, d_list=d_list,
        eps=args.eps, delta=args.delta, c1=args.c1, c2=args.c2, c_m=args.c_m,
        ell=args.ell, k=args.k, bit_k=args.bit_k, cap_scale=args.cap_scale,
        reps=args.reps, samples=args.samples, queries=args.queries,
        method=args.method, out=args.out, format=args.format,
        emit_answers=args.emit_answers, answers=args.answers, kind=args.kind,
        manifest_out=args.manifest_out)


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    config = config_from_args(args)
    try:
        return DISPATCH[config.command](config)
    except (UsageError, GraphLoadError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ComponentTooLargeError, PhaseOneError) as exc:
        print(f"algorithmic failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
