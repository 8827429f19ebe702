"""Command-line entry points.

Exit codes: 0 success, 2 refusal (caps, validation, bad input),
3 a weighted walk sum exceeded the unweighted count, 4 internal inconsistency.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from typing import Optional

from .catalan import NotRealisableError, reconstruct_from_multiset
from .operators import NumericOverflowError, RunQuotientOperator, ShortQuotientOperator
from .oracle import (
    DegenerateGraphError,
    ResourceCapError,
    _atomic_write,
    build_avoider_graph,
    enumerate_avoiders,
    normalise_edge_rule,
    prune_for_spectral,
    read_graph,
    write_graph,
)
from .perm import InvalidInputError, PatternSpec, format_perm
from .quotient import (
    InternalConsistencyError,
    diagonal_weighted_sums,
    build_chain_213,
    build_quotient_A_weighted,
    build_quotient_B,
    build_quotient_C,
    weighted_ratio_report,
    largest_reachable_component,
    walk_table_csv,
    write_quotient,
)
from .spectral import (
    PFHypothesisError,
    analytic_213_certificate,
    bounds_csv,
    certify_bound,
    stationary_diagnostic,
    stationary_distribution,
)

log = logging.getLogger("swbound")

EXIT_OK, EXIT_REFUSED, EXIT_COUNTEREXAMPLE, EXIT_INCONSISTENT = 0, 2, 3, 4
CACHE_ENV = "SWBOUND_CACHE"
PATTERNS = ("213", "2134", "3124", "1324")
DEFAULT_QUOTIENT = {"213": "chain", "2134": "run", "3124": "descents", "1324": "short"}

# caps
FULL_GRAPH_MAX = 14
QUOTIENT_MAX = 512
EXACT_WTILDE_MAX = 50
BRUTE_AV_MAX = 9


class Refusal(Exception):
    pass


@dataclass
class RunConfig:
    mode: str
    pattern: str
    cutoff: int
    k_max: int
    quotient: str
    edge_rule: str
    arith: str
    deterministic: bool
    cache: Optional[str]
    out: Optional[str]
    quotient_given: bool = False

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        PatternSpec.parse(args.pattern)   # validates ending in the maximum
        if args.pattern not in PATTERNS:
            raise Refusal(f"pattern must be one of {', '.join(PATTERNS)}")
        cache = args.cache or os.environ.get(CACHE_ENV)
        return cls(args.mode, args.pattern, args.cutoff, args.kmax,
                   args.quotient or DEFAULT_QUOTIENT[args.pattern],
                   normalise_edge_rule(args.edge_rule) if args.edge_rule else "",
                   args.arith, args.deterministic, cache, args.out,
                   args.quotient is not None)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise Refusal(msg)


def _graph(cfg: RunConfig, N: int, rule: str):
    """Build a full graph, reading and filling the cache when one is set."""
    _need(N <= FULL_GRAPH_MAX, f"full graphs are capped at cutoff {FULL_GRAPH_MAX}")
    spec = PatternSpec.parse(cfg.pattern)
    path = None
    if cfg.cache:
        path = os.path.join(cfg.cache, f"avgraph-{cfg.pattern}-{N}-{rule}.txt")
        if os.path.exists(path):
            return read_graph(path)
    g = build_avoider_graph(spec, N, rule)
    if path:
        write_graph(g, path)
    return g


# ---------------------------------------------------------------------------

def cmd_enumerate(cfg: RunConfig) -> int:
    if cfg.quotient_given and cfg.quotient == "short":
        _need(cfg.pattern == "1324", "weighted sums are defined for 1324")
        # weighted mode: W~_{n,n} from the short-count quotient
        _need(cfg.cutoff <= EXACT_WTILDE_MAX or cfg.arith == "float",
              f"exact weighted sums are capped at n = {EXACT_WTILDE_MAX}")
        table = diagonal_weighted_sums(cfg.cutoff, cfg.arith)
        lines = ["n,Wtilde,Av"]
        for n in range(2, cfg.cutoff + 1):
            av = len(enumerate_avoiders((1, 3, 2, 4), n)) if n <= BRUTE_AV_MAX else ""
            lines.append(f"{n},{float(table[n]):.15g},{av}")
        _emit("\n".join(lines) + "\n", cfg.out)
        return EXIT_OK
    pat = PatternSpec.parse(cfg.pattern).pattern
    lines = ["n,count"]
    for n in range(1, cfg.cutoff + 1):
        lines.append(f"{n},{len(enumerate_avoiders(pat, n))}")
    _emit("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK


def cmd_graph(cfg: RunConfig, quotient: bool) -> int:
    """Write the full graph, or with ``quotient`` the quotient, as a cache file."""
    rule = cfg.edge_rule or "v2"
    if quotient:
        q = _quotient_graph(cfg, cfg.cutoff, cfg.edge_rule)
        path = cfg.out or (cfg.cache and os.path.join(
            cfg.cache, f"quot-{q.kind}-{cfg.cutoff}.txt"))
        if path:
            write_quotient(q, path)
        sys.stdout.write(f"{q.num_classes} classes, {q.num_edges} edges\n")
        return EXIT_OK
    g = _graph(cfg, cfg.cutoff, rule)
    if cfg.out:
        write_graph(g, cfg.out)
    sys.stdout.write(f"{g.num_vertices} vertices, {g.num_edges} edges\n")
    return EXIT_OK


def _quotient_graph(cfg: RunConfig, N: int, rule: str):
    kind = cfg.quotient
    if kind == "run":
        return build_quotient_B(N, rule or "v1")
    if kind == "descents":
        return build_quotient_C(N, rule or "v2")
    if kind == "short":
        _need(N <= 60, "explicit short-count quotients are capped at 60")
        return build_quotient_A_weighted(N)
    return build_chain_213(N, rule or "v2")


def _bound_one(cfg: RunConfig, N: int):
    _need(N <= QUOTIENT_MAX, f"quotients are capped at cutoff {QUOTIENT_MAX}")
    kind = cfg.quotient
    if kind == "chain":
        _need(cfg.pattern == "213", "the chain quotient belongs to 213")
        return analytic_213_certificate(N, cfg.edge_rule or "v2")
    if kind == "run":
        _need(cfg.pattern == "2134", "the run quotient belongs to 2134")
        op = RunQuotientOperator(N, cfg.edge_rule or "v1")
    elif kind == "short":
        _need(cfg.pattern == "1324", "the short-count quotient belongs to 1324")
        op = ShortQuotientOperator(N)
    else:
        _need(cfg.pattern == "3124", "the descent quotient belongs to 3124")
        _need(N <= 20, "descent quotients are capped at cutoff 20")
        op = largest_reachable_component(build_quotient_C(N, cfg.edge_rule or "v2")).operator()
    return certify_bound(op, cfg.pattern, kind, N, edge_rule=cfg.edge_rule)


def cmd_bound(cfg: RunConfig, sweep: Optional[list], csv_path: Optional[str]) -> int:
    Ns = sweep or [cfg.cutoff]
    rows = []
    best = None
    for N in Ns:
        cert = _bound_one(cfg, N)
        rows.append((N, cert.lambda_estimate, cert.rho_certified))
        log.info("N=%d lambda=%.12f rho=%.12f", N, cert.lambda_estimate, cert.rho_float)
        if best is None or cert.rho_certified > best.rho_certified:
            best = cert
    if cfg.out:
        best.write(cfg.out)
    sys.stdout.write(best.to_text(include_vector=False))
    if csv_path:
        text = bounds_csv(rows)
        if os.path.exists(csv_path):
            with open(csv_path, encoding="utf-8") as fh:
                old = fh.read()
            text = old + text.split("\n", 1)[1]
        _atomic_write(csv_path, text)
    return EXIT_OK


def cmd_ratios(cfg: RunConfig, n_min: int) -> int:
    _need(cfg.pattern == "1324", "the weighted comparison is defined for 1324")
    _need(cfg.cutoff <= FULL_GRAPH_MAX - 2, f"cutoff capped at {FULL_GRAPH_MAX - 2}")
    rep = weighted_ratio_report(cfg.cutoff, cfg.k_max, n_min=n_min, log=log.info)
    _emit(walk_table_csv(rep.rows), cfg.out)
    sys.stderr.write(f"max ratio {float(rep.max_ratio):.12g}; "
                     f"{len(rep.counterexamples)} ratios above 1\n")
    return EXIT_COUNTEREXAMPLE if rep.counterexamples else EXIT_OK


def cmd_stationary(cfg: RunConfig, step_rule: str) -> int:
    g = prune_for_spectral(_graph(cfg, cfg.cutoff, cfg.edge_rule or "v2"))
    res = stationary_distribution(g, step_rule)
    lines = [f"# step_rule={step_rule} eigenvalue={res.eigenvalue:.15g} residual={res.residual:.3g}",
             "n,short,count,mean_sigma_nfact,min_sigma_nfact,max_sigma_nfact"]
    for r in stationary_diagnostic(g, res):
        lines.append(f"{r['n']},{r['short']},{r['count']},{r['mean']:.12g},{r['min']:.12g},{r['max']:.12g}")
    _emit("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK


def parse_multiset(text: str) -> list[int]:
    out = []
    for tok in text.replace(",", " ").replace("{", " ").replace("}", " ").split():
        try:
            val = int(tok)
        except ValueError:
            raise InvalidInputError(f"bad multiset token {tok!r}") from None
        if val < 0:
            raise InvalidInputError(f"bad multiset token {tok!r}: negative")
        out.append(val)
    return out


def cmd_reconstruct(text: str, out: Optional[str]) -> int:
    p = reconstruct_from_multiset(parse_multiset(text))
    _emit(format_perm(p) + "\n", out)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swbound", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="mode", required=True)

    def common(p, cutoff_default=8, kmax_default=None):
        p.add_argument("--pattern", default="1324")
        p.add_argument("--cutoff", type=int, default=cutoff_default)
        p.add_argument("--kmax", type=int, default=kmax_default)
        p.add_argument("--quotient", choices=("run", "descents", "short", "chain"))
        p.add_argument("--edge-rule", choices=("v1", "v2"))
        p.add_argument("--arith", choices=("exact", "float"), default="exact")
        p.add_argument("--deterministic", action="store_true",
                       help="accepted for scripts; every command is already deterministic")
        p.add_argument("--cache", help=f"cache directory (default ${CACHE_ENV})")
        p.add_argument("--out", help="output path (default stdout)")
        return p

    common(sub.add_parser("enumerate", help="avoider counts, or weighted sums with --quotient short"))
    common(sub.add_parser("graph", help="build a graph and write its cache file"))
    b = common(sub.add_parser("bound", help="certified lower bound from a quotient"), 50)
    b.add_argument("--sweep", help="comma-separated cutoffs; the best certificate is kept")
    b.add_argument("--csv", help="bounds CSV to append (N, lambda, rho)")
    c = common(sub.add_parser("conjecture", help="weighted/unweighted walk ratios"), 9, 10)
    c.add_argument("--nmin", type=int, default=1)
    s = common(sub.add_parser("stationary", help="stationary distribution diagnostic"))
    s.add_argument("--step-rule", choices=("uniform", "length"), default="uniform")
    r = sub.add_parser("reconstruct", help="rebuild a 132-avoider from its removal multiset")
    r.add_argument("multiset", nargs="?", help="values; read from stdin when absent")
    r.add_argument("--out")
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.mode == "reconstruct":
            text = args.multiset if args.multiset is not None else sys.stdin.read()
            return cmd_reconstruct(text, args.out)
        if args.kmax is None:
            args.kmax = args.cutoff
        cfg = RunConfig.from_args(args)
        _need(cfg.cutoff >= 1, "cutoff must be positive")
        if cfg.mode == "enumerate":
            return cmd_enumerate(cfg)
        if cfg.mode == "graph":
            return cmd_graph(cfg, cfg.quotient_given)
        if cfg.mode == "bound":
            sweep = [int(x) for x in args.sweep.split(",")] if args.sweep else None
            return cmd_bound(cfg, sweep, args.csv)
        if cfg.mode == "conjecture":
            return cmd_ratios(cfg, args.nmin)
        if cfg.mode == "stationary":
            return cmd_stationary(cfg, args.step_rule)
    except InternalConsistencyError as exc:
        sys.stderr.write(f"internal consistency error: {exc}\n")
        return EXIT_INCONSISTENT
    except (Refusal, ResourceCapError, InvalidInputError, NotRealisableError,
            PFHypothesisError, DegenerateGraphError, NumericOverflowError, ValueError) as exc:
        sys.stderr.write(f"refused: {exc}\n")
        return EXIT_REFUSED
    return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
