"""Power iteration, Collatz-Wielandt certification, Perron-Frobenius checks
and stationary distributions."""
from __future__ import annotations

import hashlib
import math
import platform
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix, identity
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .operators import MatrixOperator, NumericOverflowError
from .oracle import AvoiderGraph, _atomic_write
from .perm import InvalidInputError, short_count
from .quotient import build_chain_213

SNAP_BITS = 64
CONDITION_WEIGHTED = "assumes weighted walk sums never exceed unweighted walk counts"


class PFHypothesisError(RuntimeError):
    """The graph is not strongly connected with a loop where that is required."""


# ---------------------------------------------------------------------------
# Perron-Frobenius hypotheses

@dataclass
class PFReport:
    strongly_connected: bool
    has_loop: bool
    dropped: list
    component: np.ndarray  # bool over classes

    @property
    def ok(self) -> bool:
        return self.strongly_connected and self.has_loop


def _closure(step, seed: np.ndarray, mask: np.ndarray) -> np.ndarray:
    reach = seed.copy()
    while True:
        nxt = reach | ((step(reach.astype(np.float64)) > 0) & mask)
        if (nxt == reach).all():
            return reach
        reach = nxt


def validate_pf_hypotheses(op, hub: Optional[int] = None) -> PFReport:
    """Find the strongly connected component of ``hub`` (default: the start)
    by closing forwards with ``propagate`` and backwards with ``apply``.

    The operator counts as strongly connected when that component is all of
    its mask; ``dropped`` lists the masked classes outside it.
    """
    hub = op.start if hub is None else hub
    mask = np.asarray(op.mask, dtype=bool)
    if not mask[hub]:
        return PFReport(False, False, [k for k, m in zip(op.keys, mask) if m],
                        np.zeros(op.dim, dtype=bool))
    seed = np.zeros(op.dim, dtype=bool)
    seed[hub] = True
    fwd = _closure(op.propagate, seed, mask)
    bwd = _closure(op.apply, seed, mask)
    comp = fwd & bwd
    dropped = [k for k, m, c in zip(op.keys, mask, comp) if m and not c]
    has_loop = bool((op.diagonal()[comp] > 0).any())
    return PFReport(not dropped, has_loop, dropped, comp)


def restrict_to_component(op, report: PFReport):
    op.mask = np.asarray(op.mask, dtype=bool) & report.component
    return op


# ---------------------------------------------------------------------------
# power method

@dataclass
class PowerResult:
    lam: float
    v: np.ndarray
    iterations: int
    converged: bool


def power_iteration(op, tol: float = 1e-12, max_iters: int = 200_000,
                    v0: Optional[np.ndarray] = None, patience: int = 3) -> PowerResult:
    """Start from ones on the mask, apply and rescale to sum 1.

    The estimate is the growth of the sum in one step. It must move by less
    than ``tol`` on ``patience`` consecutive steps; a single quiet step can
    happen early when a block of top-level classes all grow at the same rate.
    """
    mask = np.asarray(op.mask, dtype=bool)
    v = mask.astype(np.float64) if v0 is None else np.asarray(v0, dtype=np.float64) * mask
    if not v.any():
        raise InvalidInputError("starting vector is zero")
    v = v / v.sum()
    lam_prev = math.inf
    lam = 0.0
    quiet = 0
    for it in range(1, max_iters + 1):
        w = op.apply(v)
        total = w.sum()
        if not np.isfinite(total) or not np.isfinite(w).all():
            raise NumericOverflowError(f"non-finite values after {it} iterations")
        if total <= 0:
            return PowerResult(0.0, v, it, True)
        lam = float(total)
        v = w / total
        quiet = quiet + 1 if abs(lam - lam_prev) < tol else 0
        if quiet >= patience:
            return PowerResult(lam, v, it, True)
        lam_prev = lam
    return PowerResult(lam, v, max_iters, False)


# ---------------------------------------------------------------------------
# Collatz-Wielandt

@dataclass
class CWResult:
    rho: Fraction
    argmin: tuple
    digest: str
    vector: list   # the snapped integer vector
    support: int


def snap_vector(v: Sequence[float], bits: int = SNAP_BITS) -> list[int]:
    """Integers proportional to ``v`` keeping ``bits`` significant bits of
    every coordinate.

    Each coordinate is rounded to a ``bits``-bit mantissa times a power of
    two and all of them are put over the smallest power of two. A fixed
    absolute grid would wipe out coordinates many orders of magnitude below
    the largest one, and those decide the minimum ratio.
    """
    v = np.asarray(v, dtype=np.float64)
    if (v < 0).any() or not np.isfinite(v).all():
        raise InvalidInputError("vector must be finite and nonnegative")
    if not v.size or v.max() <= 0:
        raise InvalidInputError("vector is zero")
    parts = []
    for x in v.tolist():
        if x == 0.0:
            parts.append((0, 0))
            continue
        mant, exp = math.frexp(x)          # x = mant * 2**exp, 0.5 <= mant < 1
        parts.append((int(round(mant * 2 ** bits)), exp - bits))
    low = min(e for m, e in parts if m)
    return [m << (e - low) if m else 0 for m, e in parts]


def vector_digest(V: Sequence[int]) -> str:
    return hashlib.sha256(",".join(map(str, V)).encode()).hexdigest()


def certify_collatz_wielandt(op, v: Sequence, snapped: bool = False) -> CWResult:
    """min over supported coordinates of (A V)_i / V_i, in exact arithmetic.

    ``v`` is snapped to integers first unless ``snapped`` is set, in which case
    it must already be a sequence of nonnegative integers.
    """
    V = [int(x) for x in v] if snapped else snap_vector(v)
    if any(x < 0 for x in V):
        raise InvalidInputError("vector must be nonnegative")
    mask = np.asarray(op.mask, dtype=bool)
    V = [x if m else 0 for x, m in zip(V, mask)]
    if not any(V):
        raise InvalidInputError("vector vanishes on the operator's classes")
    AV = op.apply_exact(V)
    best, arg, support = None, None, 0
    for i, (a, x) in enumerate(zip(AV, V)):
        if x:
            support += 1
            ratio = Fraction(a) / x
            if best is None or ratio < best:
                best, arg = ratio, op.keys[i]
    return CWResult(best, arg, vector_digest(V), V, support)


# ---------------------------------------------------------------------------
# certificates

@dataclass
class BoundCertificate:
    pattern: str
    kind: str
    cutoff: int
    lambda_estimate: float
    rho_certified: Fraction
    iterations: int
    tolerance: float
    converged: bool
    digest: str
    conditional: bool
    mode: str = "exact"
    edge_rule: str = ""
    argmin: tuple = ()
    note: str = ""
    vector: list = field(default_factory=list, repr=False)

    @property
    def rho_float(self) -> float:
        return float(self.rho_certified)

    def to_text(self, include_vector: bool = True) -> str:
        lines = [
            "boundcert v1",
            f"pattern {self.pattern}",
            f"kind {self.kind}",
            f"cutoff {self.cutoff}",
            f"edge_rule {self.edge_rule or '-'}",
            f"lambda_estimate {self.lambda_estimate!r}",
            f"rho_certified {self.rho_certified.numerator}/{self.rho_certified.denominator}",
            f"rho_decimal {self.rho_float:.12f}",
            f"iterations {self.iterations}",
            f"tolerance {self.tolerance!r}",
            f"converged {int(self.converged)}",
            f"arithmetic {self.mode}",
            f"vector_sha256 {self.digest}",
            f"conditional {int(self.conditional)}",
            f"condition {CONDITION_WEIGHTED if self.conditional else '-'}",
            f"argmin {' '.join(map(str, self.argmin)) or '-'}",
            f"note {self.note or '-'}",
            f"python {platform.python_version()} numpy {np.__version__}",
        ]
        if include_vector and self.vector:
            lines.append(f"vector {len(self.vector)}")
            lines += [str(x) for x in self.vector]
        return "\n".join(lines) + "\n"

    def write(self, path: str, include_vector: bool = True) -> None:
        _atomic_write(path, self.to_text(include_vector))


def read_certificate(path: str) -> BoundCertificate:
    fields: dict = {}
    vector: list[int] = []
    with open(path, encoding="utf-8") as fh:
        if fh.readline().strip() != "boundcert v1":
            raise InvalidInputError(f"{path}: not a boundcert v1 file")
        lines = iter(fh.read().splitlines())
        for line in lines:
            key, _, val = line.partition(" ")
            if key == "vector":
                vector = [int(next(lines)) for _ in range(int(val))]
                break
            fields[key] = val
    num, den = fields["rho_certified"].split("/")
    argmin = tuple(int(x) for x in fields["argmin"].split()) if fields["argmin"] != "-" else ()
    return BoundCertificate(
        pattern=fields["pattern"], kind=fields["kind"], cutoff=int(fields["cutoff"]),
        lambda_estimate=float(fields["lambda_estimate"]),
        rho_certified=Fraction(int(num), int(den)), iterations=int(fields["iterations"]),
        tolerance=float(fields["tolerance"]), converged=fields["converged"] == "1",
        digest=fields["vector_sha256"], conditional=fields["conditional"] == "1",
        mode=fields["arithmetic"],
        edge_rule="" if fields["edge_rule"] == "-" else fields["edge_rule"],
        argmin=argmin, note="" if fields["note"] == "-" else fields["note"], vector=vector)


def recertify(cert: BoundCertificate, op) -> Fraction:
    """Recompute rho from the stored vector; it must match bit for bit."""
    if vector_digest(cert.vector) != cert.digest:
        raise InvalidInputError("stored vector does not match its digest")
    return certify_collatz_wielandt(op, cert.vector, snapped=True).rho


def certify_bound(op, pattern: str, kind: str, cutoff: int, tol: float = 1e-12,
                  max_iters: int = 200_000, edge_rule: str = "",
                  require_pf: bool = True) -> BoundCertificate:
    report = validate_pf_hypotheses(op)
    if require_pf and not report.has_loop:
        raise PFHypothesisError(f"{kind} quotient at cutoff {cutoff} has no loop in its main component")
    restrict_to_component(op, report)
    pr = power_iteration(op, tol=tol, max_iters=max_iters)
    cw = certify_collatz_wielandt(op, pr.v)
    conditional = kind == "short"
    cert = BoundCertificate(pattern, kind, cutoff, pr.lam, cw.rho, pr.iterations, tol,
                            pr.converged, cw.digest, conditional, "exact", edge_rule,
                            cw.argmin, vector=cw.vector)
    if report.dropped:
        cert.note = f"{len(report.dropped)} classes outside the main component"
    if cert.rho_certified > Fraction(cert.lambda_estimate) + Fraction(tol) * max(1, cert.lambda_estimate):
        raise ArithmeticError("certified value exceeds the power estimate")
    return cert


# ---------------------------------------------------------------------------
# 213

def alpha_213(N: int) -> Fraction:
    """4 - 2^(N-1)/3^(N-2)."""
    return 4 - Fraction(2 ** (N - 1), 3 ** (N - 2))


def analytic_213_vector(N: int) -> list[Fraction]:
    """(1, 1, 2/3, (2/3)^2, ...) cut to length N."""
    return [Fraction(1)] + [Fraction(2, 3) ** (j - 2) for j in range(2, N + 1)]


def analytic_213_certificate(N: int, edge_rule: str = "v2") -> BoundCertificate:
    """Collatz-Wielandt value of the closed-form vector on the Av(21) chain.

    The vector is matched to incoming edges, so the ratio at vertex j is
    (v A)_j / v_j; the transpose has the same spectral radius. The returned
    rho is the true minimum ratio. At the first two vertices the ratio is
    alpha_213(N); the minimum sits near the truncated end.
    """
    if N < 3:
        raise InvalidInputError("cutoff must be at least 3")
    q = build_chain_213(N, edge_rule)
    op = q.operator()
    v = analytic_213_vector(N)
    vA = op.propagate_exact(v)
    ratios = [Fraction(a) / b for a, b in zip(vA, v)]
    rho = min(ratios)
    argmin = q.keys[ratios.index(rho)]
    pr = power_iteration(op)
    return BoundCertificate("213", "chain", N, pr.lam, rho, pr.iterations, 1e-12, pr.converged,
                            vector_digest([f"{x.numerator}/{x.denominator}" for x in v]),
                            False, "exact", edge_rule, argmin,
                            note=f"ratio at vertex 1 = {float(ratios[0]):.12f}")


# ---------------------------------------------------------------------------
# stationary distributions

@dataclass
class StationaryResult:
    sigma: np.ndarray
    eigenvalue: float      # 1 for a stochastic rule
    residual: float        # max |sigma P - eigenvalue * sigma|
    iterations: int
    step_rule: str
    P: csr_matrix = field(repr=False)


def transition_matrix(g: AvoiderGraph, step_rule: str = "uniform") -> csr_matrix:
    """``uniform``: each out-edge copy is taken with probability 1/outdegree.
    ``length``: weight 1/|source| per copy, which is not stochastic when the
    out-degree is |source|+1."""
    src = g.src()
    if step_rule == "uniform":
        denom = g.out_multiplicity().astype(np.float64)[src]
    elif step_rule == "length":
        denom = np.array([len(g.vertices[s]) for s in src.tolist()], dtype=np.float64)
    else:
        raise InvalidInputError(f"unknown step rule {step_rule!r}")
    n = g.num_vertices
    return csr_matrix((g.mult / denom, g.dst, g.indptr), shape=(n, n))


def stationary_vector(P: csr_matrix, tol: float = 1e-13, max_iters: int = 100_000):
    """Left Perron vector of ``P`` normalised to sum 1, with its eigenvalue.

    Iterates sigma <- sigma P / |sigma P|_1; if that stalls above ``tol`` the
    answer is polished with one sparse solve of sigma (P - mu I) = 0.
    Returns (sigma, mu, residual, iterations).
    """
    n = P.shape[0]
    PT = csr_matrix(P).T.tocsr()
    sigma = np.full(n, 1.0 / n)
    mu = 1.0
    it = 0
    for it in range(1, max_iters + 1):
        nxt = PT @ sigma
        mu = float(nxt.sum())
        nxt /= mu
        done = np.abs(nxt - sigma).max() < tol
        sigma = nxt
        if done:
            break
    residual = float(np.abs(PT @ sigma - mu * sigma).max())
    if residual > tol:
        # replace one equation by the normalisation
        A = (PT - mu * identity(n, format="csr")).tolil()
        A[0, :] = np.ones(n)
        b = np.zeros(n)
        b[0] = 1.0
        sigma = spsolve(A.tocsr(), b)
        residual = float(np.abs(PT @ sigma - mu * sigma).max())
    return sigma, mu, residual, it


def stationary_distribution(g: AvoiderGraph, step_rule: str = "uniform", tol: float = 1e-13,
                            max_iters: int = 100_000) -> StationaryResult:
    """Stationary distribution of the walk on a strongly connected graph with a loop."""
    n = g.num_vertices
    if n == 0:
        raise PFHypothesisError("empty graph")
    _, labels = connected_components(g.adjacency(), directed=True, connection="strong")
    if labels.max() != 0:
        raise PFHypothesisError("graph is not strongly connected")
    if not g.has_loop():
        raise PFHypothesisError("graph has no loop")
    P = transition_matrix(g, step_rule)
    sigma, mu, residual, it = stationary_vector(P, tol, max_iters)
    return StationaryResult(sigma, mu, residual, it, step_rule, P)


def stationary_diagnostic(g: AvoiderGraph, res: StationaryResult) -> list[dict]:
    """Per (length, short count) class: sigma * n! summary against the short count."""
    groups: dict = {}
    for p, s in zip(g.vertices, res.sigma.tolist()):
        key = (len(p), short_count(p))
        groups.setdefault(key, []).append(s * math.factorial(len(p)))
    rows = []
    for (n, f), vals in sorted(groups.items()):
        rows.append({"n": n, "short": f, "count": len(vals), "mean": sum(vals) / len(vals),
                     "min": min(vals), "max": max(vals)})
    return rows


# ---------------------------------------------------------------------------
# sweeps

def fit_convergence_exponent(Ns: Sequence[int], lambdas: Sequence[float], limit: float) -> float:
    """Slope of log(limit - lambda_N) against log N."""
    x = np.log(np.asarray(Ns, dtype=np.float64))
    gap = limit - np.asarray(lambdas, dtype=np.float64)
    if (gap <= 0).any():
        raise InvalidInputError("estimates must stay below the limit")
    slope, _ = np.polyfit(x, np.log(gap), 1)
    return float(slope)


def monotone_warnings(Ns: Sequence[int], values: Sequence[float], label: str) -> list[str]:
    msgs = []
    for (a, x), (b, y) in zip(zip(Ns, values), zip(Ns[1:], values[1:])):
        if y < x:
            msg = f"{label}: value at N={b} ({y:.12g}) is below N={a} ({x:.12g})"
            warnings.warn(msg)
            msgs.append(msg)
    return msgs


def bounds_csv(rows: Sequence[tuple]) -> str:
    out = ["N,lambda,rho"]
    out += [f"{N},{lam:.15g},{float(rho):.15g}" for N, lam, rho in rows]
    return "\n".join(out) + "\n"


def dense_operator(a: np.ndarray) -> MatrixOperator:
    return MatrixOperator.from_dense(a)


def graph_operator(g: AvoiderGraph) -> MatrixOperator:
    """Adjacency of a full avoider graph, with multiplicities, keyed by vertex."""
    return MatrixOperator(g.vertices, g.indptr, g.dst, g.mult.tolist(), g.start)
