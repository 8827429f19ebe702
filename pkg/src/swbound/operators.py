"""Nonnegative linear operators on class vectors.

Every operator exposes the same small interface:

* ``apply(v)``: the right action (A v)_i = sum_j A_ij v_j, in floats;
* ``apply_exact(V)``: the same for integer vectors, returning Fractions;
* ``propagate(x)``: the left action (x A)_j, which pushes walk weights one step;
* ``propagate_exact(x)``: the same on exact values;
* ``diagonal()``: loop weights.

``mask`` marks the classes the operator acts on; results vanish outside it,
which is the same as working with the principal submatrix on the mask.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import lcm, lgamma, exp
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix

from .catalan import catalan_triangle


class NumericOverflowError(ArithmeticError):
    """Floating-point values left the finite range."""


class _Base:
    keys: list
    start: int
    mask: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.keys)

    def index_of(self, key) -> int:
        return self._index[tuple(key)]

    def _set_keys(self, keys: Sequence[tuple]) -> None:
        self.keys = [tuple(k) for k in keys]
        self._index = {k: i for i, k in enumerate(self.keys)}


# ---------------------------------------------------------------------------
# explicit

class MatrixOperator(_Base):
    """Sparse matrix given by CSR rows with exact (int or Fraction) weights."""

    def __init__(self, keys, indptr, dst, weights, start: int = 0,
                 mask: Optional[np.ndarray] = None):
        self._set_keys(keys)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        self.weights = list(weights)
        self.start = start
        n = self.dim
        self.mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        wf = np.array([float(w) for w in self.weights], dtype=np.float64)
        self.matrix = csr_matrix((wf, self.dst, self.indptr), shape=(n, n))
        # exact rows over a common denominator
        self._row_den = []
        self._row_num = []
        for i in range(n):
            ws = self.weights[self.indptr[i]:self.indptr[i + 1]]
            den = lcm(*[Fraction(w).denominator for w in ws]) if ws else 1
            self._row_den.append(den)
            self._row_num.append([int(Fraction(w) * den) for w in ws])

    @classmethod
    def from_dense(cls, a: np.ndarray, start: int = 0) -> "MatrixOperator":
        """Float or Fraction-valued dense matrix; zero entries are dropped."""
        a = np.asarray(a, dtype=object)
        n = a.shape[0]
        indptr, dst, w = [0], [], []
        for i in range(n):
            for j in range(n):
                if a[i, j] != 0:
                    dst.append(j)
                    x = a[i, j]
                    w.append(Fraction(x) if not isinstance(x, (int, Fraction)) else x)
            indptr.append(len(dst))
        return cls([(i,) for i in range(n)], indptr, dst, w, start)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return (self.matrix @ (v * self.mask)) * self.mask

    def propagate(self, x: np.ndarray) -> np.ndarray:
        return (self.matrix.T @ (x * self.mask)) * self.mask

    def apply_exact(self, V: Sequence[int]) -> list:
        out = []
        for i in range(self.dim):
            if not self.mask[i]:
                out.append(Fraction(0))
                continue
            a, b = self.indptr[i], self.indptr[i + 1]
            total = 0
            for d, num in zip(self.dst[a:b].tolist(), self._row_num[i]):
                if self.mask[d]:
                    total += num * V[d]
            out.append(Fraction(total, self._row_den[i]))
        return out

    def propagate_exact(self, x: Sequence) -> list:
        out = [0] * self.dim
        for i in range(self.dim):
            xi = x[i]
            if not xi or not self.mask[i]:
                continue
            a = self.indptr[i]
            for off, d in enumerate(self.dst[a:self.indptr[i + 1]].tolist()):
                if self.mask[d]:
                    out[d] += xi * self.weights[a + off]
        return out

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal() * self.mask


# ---------------------------------------------------------------------------
# initial-run quotient (2134)

class RunQuotientOperator(_Base):
    """Classes (n, r), 2 <= n <= N, 1 <= r <= n-1, unit weights.

    (n, r) points to (n+1, 1..r+1) when n < N and to (m, r) for r < m <= n.
    With ``edge_rule='v2'`` the size-N classes also point to (N, 1..min(r+1, N-1)).
    Under v1 the class (N, N-1) only has a loop and is masked out.
    """

    def __init__(self, N: int, edge_rule: str = "v1"):
        if N < 2:
            raise ValueError("cutoff must be at least 2")
        self.N = N
        self.edge_rule = edge_rule
        keys = [(n, r) for n in range(2, N + 1) for r in range(1, n)]
        self._set_keys(keys)
        self._rows = np.array([k[0] for k in keys])
        self._cols = np.array([k[1] for k in keys])
        self.mask = np.ones(len(keys), dtype=bool)
        if edge_rule == "v1" and N > 2:
            self.mask[self.index_of((N, N - 1))] = False
        self.start = self.index_of((2, 1))

    def _grid(self, v, dtype):
        V = np.zeros((self.N + 2, self.N + 1), dtype=dtype)
        V[self._rows, self._cols] = np.where(self.mask, v, 0) if dtype is not object else \
            [x if m else 0 for x, m in zip(v, self.mask)]
        return V

    def _right(self, V):
        N = self.N
        rows = np.cumsum(V, axis=1)   # rows[n, j] = sum_{s<=j} V[n, s]
        cols = np.cumsum(V, axis=0)   # cols[n, r] = sum_{m<=n} V[m, r]
        out = np.zeros_like(V)
        out[2:N + 1, 1:N] = cols[2:N + 1, 1:N]
        out[2:N, 1:N] += rows[3:N + 1, 2:N + 1]
        if self.edge_rule == "v2":
            idx = np.minimum(np.arange(1, N) + 1, N - 1)
            out[N, 1:N] += rows[N, idx]
        return out

    def _left(self, X):
        N = self.N
        out = np.zeros_like(X)
        # ascending: x'(m, s) = sum_{r >= s-1} x(m-1, r)
        rev = np.cumsum(X[:, ::-1], axis=1)[:, ::-1]   # rev[n, j] = sum_{r>=j} X[n, r]
        out[3:N + 1, 1:N] += rev[2:N, 0:N - 1]
        # lateral/descending: x'(m, s) = sum_{n >= m} x(n, s)
        down = np.cumsum(X[::-1, :], axis=0)[::-1, :]
        out[2:N + 1, 1:N] += down[2:N + 1, 1:N]
        if self.edge_rule == "v2":
            # (N, r) -> (N, s) for s <= min(r+1, N-1)
            out[N, 1:N] += rev[N, 0:N - 1]
        return out

    def _valid(self, G):
        return G[self._rows, self._cols]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._valid(self._right(self._grid(v, np.float64))) * self.mask

    def propagate(self, x: np.ndarray) -> np.ndarray:
        return self._valid(self._left(self._grid(x, np.float64))) * self.mask

    def apply_exact(self, V: Sequence[int]) -> list:
        out = self._valid(self._right(self._grid(list(V), object)))
        return [Fraction(int(o)) if m else Fraction(0) for o, m in zip(out, self.mask)]

    def propagate_exact(self, x: Sequence) -> list:
        out = self._valid(self._left(self._grid(list(x), object)))
        return [o if m else 0 for o, m in zip(out, self.mask)]

    def diagonal(self) -> np.ndarray:
        # insertion at the very end trims back to the same class
        d = np.ones(self.dim)
        if self.edge_rule == "v2":
            d[self._rows == self.N] += 1
        return d * self.mask


# ---------------------------------------------------------------------------
# weighted short-count quotient (1324)

@lru_cache(maxsize=8)
def _log_catalan_triangle(N: int) -> np.ndarray:
    out = np.full((N + 1, N + 1), -np.inf)
    for n in range(N + 1):
        for k in range(n + 1):
            out[n, k] = (np.log(n - k + 1) - np.log(n + 1) + lgamma(n + k + 1)
                         - lgamma(n + 1) - lgamma(k + 1))
    return out


class ShortQuotientOperator(_Base):
    """Implicit form of the weighted quotient on classes (n, r) of 132-avoiders
    with r short values, 1 <= n <= N, 0 <= r <= n-1.

    The weight on (n,r)->(m,s) is E(n,r,m,s)/T(n-1,r). Writing U for the
    unnormalised image, the descending part obeys the Pascal rule
    E(n,r,m,s) = E(n-1,r,m,s) + E(n,r-1,m,s), so it is a prefix sum of the
    previous level's total; the same-level part is a Hankel product with
    T(n-1, r+s-n); ascending edges carry weight 1 to (n+1, r..n).
    Ascending edges out of level N are dropped.

    ``mask`` defaults to the classes with n >= 2 and r >= 1; the classes
    (n, 0) are single decreasing permutations that nothing else reaches.
    """

    MAX_CUTOFF = 480  # T(N-1, k) must stay inside the float range

    def __init__(self, N: int, mask: Optional[np.ndarray] = None):
        if N < 1:
            raise ValueError("cutoff must be at least 1")
        if N > self.MAX_CUTOFF:
            raise NumericOverflowError(
                f"cutoff {N} exceeds {self.MAX_CUTOFF}; class sizes overflow floats")
        self.N = N
        keys = [(n, r) for n in range(1, N + 1) for r in range(n)]
        self._set_keys(keys)
        self._rows = np.array([k[0] for k in keys])
        self._cols = np.array([k[1] for k in keys])
        if mask is None:
            mask = (self._rows >= 2) & (self._cols >= 1)
        self.mask = np.asarray(mask, dtype=bool)
        self.start = self.index_of((2, 1)) if N >= 2 else 0
        logT = _log_catalan_triangle(N)
        self.T = np.where(np.isfinite(logT), np.exp(logT), 0.0)
        # Hankel blocks H[n][r, s] = T(n-1, r+s-n), zero for negative index
        self.H = [None]
        for n in range(1, N + 1):
            idx = np.arange(n)[:, None] + np.arange(n)[None, :] - n
            blk = np.where(idx >= 0, self.T[n - 1, np.clip(idx, 0, None)], 0.0)
            self.H.append(blk)
        # same-level weights normalised by the source class size, for the diagonal
        self._diag = np.array([self._same_level_weight(n, r, r) for n, r in keys])

    def _same_level_weight(self, n: int, r: int, s: int) -> float:
        k = r + s - n
        if k < 0:
            return 0.0
        logT = _log_catalan_triangle(self.N)
        return exp(logT[n - 1, k] - logT[n - 1, r])

    def _grid(self, v, dtype):
        V = np.zeros((self.N + 2, self.N + 1), dtype=dtype)
        if dtype is object:
            V[self._rows, self._cols] = [x if m else 0 for x, m in zip(v, self.mask)]
        else:
            V[self._rows, self._cols] = np.where(self.mask, v, 0.0)
        return V

    # float path ------------------------------------------------------------

    def _unnormalised(self, V: np.ndarray) -> np.ndarray:
        N = self.N
        U = np.zeros_like(V)
        G = np.zeros(N + 1)
        Dprev = np.zeros(N + 1)
        for n in range(1, N + 1):
            if n >= 2:
                G = np.cumsum(G + Dprev)
                G[n:] = 0.0
            Dn = np.zeros(N + 1)
            Dn[:n] = self.H[n] @ V[n, :n]
            U[n] = G + Dn
            if n < N:
                tail = np.cumsum(V[n + 1, :n + 1][::-1])[::-1]
                U[n, :n] += self.T[n - 1, :n] * tail[:n]
            Dprev = Dn
        return U

    def apply(self, v: np.ndarray) -> np.ndarray:
        U = self._unnormalised(self._grid(v, np.float64))
        out = U[self._rows, self._cols] / self.T[self._rows - 1, self._cols]
        return out * self.mask

    def propagate(self, x: np.ndarray) -> np.ndarray:
        N = self.N
        X = self._grid(x, np.float64)
        Y = np.zeros_like(X)
        for n in range(1, N + 1):
            Y[n, :n] = X[n, :n] / self.T[n - 1, :n]
        out = np.zeros_like(X)
        phi = np.zeros(N + 1)
        for m in range(N, 0, -1):
            Z = Y[m] + phi
            Z[m:] = 0.0
            out[m, :m] += self.H[m] @ Z[:m]
            if m >= 2:
                out[m, :m] += np.cumsum(X[m - 1, :m])
            phi = np.cumsum(Z[::-1])[::-1]
        return out[self._rows, self._cols] * self.mask

    def diagonal(self) -> np.ndarray:
        return self._diag * self.mask

    # exact path ------------------------------------------------------------

    def unnormalised_exact(self, V: Sequence[int]) -> list[int]:
        """Integer U(n,r) = sum E(n,r,m,s) V(m,s) in key order, with V integer."""
        N = self.N
        grid = [[0] * (n + 1) for n in range(N + 2)]
        for (n, r), x, m in zip(self.keys, V, self.mask):
            if m:
                grid[n][r] = int(x)
        T = catalan_triangle
        U: dict = {}
        G = [0] * (N + 1)
        Dprev = [0] * (N + 1)
        for n in range(1, N + 1):
            if n >= 2:
                acc = 0
                newG = [0] * (N + 1)
                for r in range(n):
                    acc += G[r] + Dprev[r]
                    newG[r] = acc
                G = newG
            row = grid[n]
            Dn = [0] * (N + 1)
            for r in range(n):
                total = 0
                for s in range(n - r, n):
                    if row[s]:
                        total += T(n - 1, r + s - n) * row[s]
                Dn[r] = total
            if n < N:
                up = grid[n + 1]
                tail = [0] * (n + 2)
                for s in range(n, -1, -1):
                    tail[s] = tail[s + 1] + up[s]
            for r in range(n):
                u = G[r] + Dn[r]
                if n < N:
                    u += T(n - 1, r) * tail[r]
                U[n, r] = u
            Dprev = Dn
        return [U[k] if m else 0 for k, m in zip(self.keys, self.mask)]

    def apply_exact(self, V: Sequence[int]) -> list:
        U = self.unnormalised_exact(V)
        return [Fraction(u, catalan_triangle(n - 1, r)) if m else Fraction(0)
                for u, (n, r), m in zip(U, self.keys, self.mask)]

    def propagate_exact(self, x: Sequence) -> list:
        N = self.N
        T = catalan_triangle
        X = [[0] * (n + 1) for n in range(N + 2)]
        for (n, r), val, m in zip(self.keys, x, self.mask):
            if m:
                X[n][r] = val
        out = [[0] * (n + 1) for n in range(N + 2)]
        phi = [0] * (N + 2)
        for m in range(N, 0, -1):
            Z = [(Fraction(X[m][r]) / T(m - 1, r) if X[m][r] else 0) + phi[r] for r in range(m)]
            for s in range(m):
                total = 0
                for r in range(m - s, m):
                    if Z[r]:
                        total += T(m - 1, r + s - m) * Z[r]
                if m >= 2:
                    total += sum(X[m - 1][r] for r in range(min(s, m - 2) + 1))
                out[m][s] = total
            phi = [0] * (N + 2)
            acc = 0
            for r in range(m - 1, -1, -1):
                acc += Z[r]
                phi[r] = acc
        return [out[n][r] if mk else 0 for (n, r), mk in zip(self.keys, self.mask)]
