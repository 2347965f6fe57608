"""Integer-lattice algebra of the action group.

``K = {t : phi_t = identity}`` is computed exactly; Smith normal form gives
the quotient ``Z^d / K = Z^p (+) torsion`` with ``l`` the torsion order, a
free complement ``F``, coset representatives, the basis matrix
``W = [F | K]``, the projected polytope ``pi{x : |Wx|_inf <= 1}`` and its
volume, and exact counts of the sets ``H_n``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .actions import (
    AtomicAction,
    CoordinateShiftAction,
    DirectSumField,
    FieldSpec,
    LatticeShiftAction,
    TranslationAction,
)
from .keys import KeyMap, box_keys


class BudgetExceeded(RuntimeError):
    pass


class RankDeficient(ValueError):
    pass


# ------------------------------------------------------------ int matrices


def int_matrix(rows, shape=None) -> np.ndarray:
    """An exact integer matrix (numpy object array of Python ints)."""
    arr = np.array(rows, dtype=object)
    if shape is not None:
        arr = arr.reshape(shape)
    if arr.ndim != 2:
        arr = arr.reshape(len(arr), -1)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = int(arr[idx])
    return out


def identity(n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=object)
    for i in range(n):
        out[i, i] = 1
    for idx in np.ndindex(out.shape):
        out[idx] = int(out[idx])
    return out


def det(M) -> int:
    """Exact determinant by fraction-free Bareiss elimination."""
    A = [[int(v) for v in row] for row in np.asarray(M, dtype=object)]
    n = len(A)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def _snf(M):
    """Return ``(U, Uinv, D, V, Vinv)`` with ``U M V = D`` in Smith form."""
    A = [[int(v) for v in row] for row in np.asarray(M, dtype=object)]
    m = len(A)
    n = len(A[0]) if m else 0
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    Ui = [[int(i == j) for j in range(m)] for i in range(m)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]
    Vi = [[int(i == j) for j in range(n)] for i in range(n)]

    def row_addmul(i, t, q):  # R_i <- R_i + q R_t
        A[i] = [a + q * b for a, b in zip(A[i], A[t])]
        U[i] = [a + q * b for a, b in zip(U[i], U[t])]
        for r in Ui:
            r[t] -= q * r[i]

    def row_swap(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]
        for r in Ui:
            r[i], r[j] = r[j], r[i]

    def row_negate(i):
        A[i] = [-a for a in A[i]]
        U[i] = [-a for a in U[i]]
        for r in Ui:
            r[i] = -r[i]

    def col_addmul(j, t, q):  # C_j <- C_j + q C_t
        for r in A:
            r[j] += q * r[t]
        for r in V:
            r[j] += q * r[t]
        Vi[t] = [a - q * b for a, b in zip(Vi[t], Vi[j])]

    def col_swap(i, j):
        for r in A:
            r[i], r[j] = r[j], r[i]
        for r in V:
            r[i], r[j] = r[j], r[i]
        Vi[i], Vi[j] = Vi[j], Vi[i]

    for t in range(min(m, n)):
        while True:
            best = None
            for i in range(t, m):
                for j in range(t, n):
                    if A[i][j] != 0 and (best is None or abs(A[i][j]) < abs(A[best[0]][best[1]])):
                        best = (i, j)
            if best is None:
                break
            if best[0] != t:
                row_swap(t, best[0])
            if best[1] != t:
                col_swap(t, best[1])
            piv = A[t][t]
            clean = True
            for i in range(t + 1, m):
                if A[i][t]:
                    row_addmul(i, t, -(A[i][t] // piv))
                    clean = clean and A[i][t] == 0
            for j in range(t + 1, n):
                if A[t][j]:
                    col_addmul(j, t, -(A[t][j] // piv))
                    clean = clean and A[t][j] == 0
            if not clean:
                continue
            bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n)
                        if A[i][j] % piv), None)
            if bad is None:
                break
            row_addmul(t, bad[0], 1)
        if best is None:
            break
        if A[t][t] < 0:
            row_negate(t)
    return tuple(int_matrix(x, (len(x), len(x[0]) if x else 0)) if x else np.zeros((0, 0), dtype=object)
                 for x in (U, Ui, A, V, Vi))


def smith_normal_form(M):
    """``(U, D, V)`` with ``U @ M @ V == D`` diagonal, ``U``, ``V`` unimodular
    and the diagonal a divisibility chain."""
    M = np.asarray(M, dtype=object)
    if M.size == 0:
        m, n = M.shape
        return identity(m), int_matrix(np.zeros((m, n), dtype=int), (m, n)) if m and n else M, identity(n)
    U, _, D, V, _ = _snf(M)
    return U, D, V


def invariant_factors(M) -> tuple:
    M = np.asarray(M, dtype=object)
    if M.size == 0:
        return ()
    D = _snf(M)[2]
    return tuple(int(D[i, i]) for i in range(min(D.shape)) if D[i, i] != 0)


def is_smith_form(D) -> bool:
    D = np.asarray(D, dtype=object)
    m, n = D.shape
    for i in range(m):
        for j in range(n):
            if i != j and D[i, j] != 0:
                return False
    diag = [int(D[i, i]) for i in range(min(m, n))]
    seen_zero = False
    for a, b in zip(diag, diag[1:] + [None]):
        if a < 0:
            return False
        if a == 0:
            seen_zero = True
        elif seen_zero:
            return False
        if b is not None and b != 0 and a != 0 and b % a:
            return False
        if b is not None and a == 0 and b != 0:
            return False
    return True


def integer_kernel(B, d: int | None = None) -> np.ndarray:
    """Basis (as columns) of ``{t in Z^d : B t = 0}``."""
    B = np.asarray(B, dtype=object)
    if d is None:
        d = B.shape[1]
    if B.size == 0 or all(v == 0 for v in B.flat):
        return identity(d)
    _, _, D, V, _ = _snf(B)
    rank = sum(1 for i in range(min(D.shape)) if D[i, i] != 0)
    return V[:, rank:]


def lattice_basis(G, d: int | None = None) -> np.ndarray:
    """Basis (as columns) of the lattice generated by the columns of ``G``."""
    G = np.asarray(G, dtype=object)
    if d is None:
        d = G.shape[0]
    if G.size == 0 or all(v == 0 for v in G.flat):
        return np.zeros((d, 0), dtype=object)
    _, Ui, D, _, _ = _snf(G)
    rank = sum(1 for i in range(min(D.shape)) if D[i, i] != 0)
    out = Ui[:, :rank].copy()
    for i in range(rank):
        out[:, i] = out[:, i] * D[i, i]
    return out


def lattice_intersection(B1, B2) -> np.ndarray:
    B1 = np.asarray(B1, dtype=object)
    B2 = np.asarray(B2, dtype=object)
    d = B1.shape[0]
    if B1.shape[1] == 0 or B2.shape[1] == 0:
        return np.zeros((d, 0), dtype=object)
    stacked = np.hstack([B1, -B2])
    ker = integer_kernel(stacked)
    return lattice_basis(B1 @ ker[: B1.shape[1], :], d)


def congruence_lattice(C, modulus: int) -> np.ndarray:
    """Basis of ``{t : C t = 0 mod modulus}``."""
    C = np.asarray(C, dtype=object)
    k, d = C.shape
    stacked = np.hstack([C, identity(k) * modulus])
    ker = integer_kernel(stacked)
    return lattice_basis(ker[:d, :], d)


def in_lattice(basis, v) -> bool:
    """Exact membership test ``v in span_Z(basis)``."""
    basis = np.asarray(basis, dtype=object)
    v = int_matrix(v, (len(v), 1))
    if basis.shape[1] == 0:
        return all(x == 0 for x in v.flat)
    U, _, D, V, _ = _snf(basis)
    w = U @ v
    r = basis.shape[1]
    for i in range(len(w)):
        di = D[i, i] if i < min(D.shape) else 0
        if di == 0:
            if w[i, 0] != 0:
                return False
        elif w[i, 0] % di:
            return False
    return True


# ----------------------------------------------------------- kernel lattice


def _schreier_lattice(d, n_points, step, points=None):
    """Stabilizer lattice common to all points of a finite Z^d-set.

    ``step(i, x)`` maps point ``x`` under generator ``i`` (``None`` when the
    image is unknown).  Returns ``(basis, limited)``.
    """
    limited = False
    rep = {}
    basis = None
    todo = range(n_points) if points is None else points
    for start in todo:
        if start in rep:
            continue
        orbit_gens = []
        rep[start] = np.zeros(d, dtype=np.int64)
        queue = [start]
        members = [start]
        while queue:
            x = queue.pop()
            for i in range(d):
                y = step(i, x)
                if y is None:
                    limited = True
                    continue
                tx = rep[x].copy()
                tx[i] += 1
                if y in rep and y in members:
                    diff = tx - rep[y]
                    if diff.any():
                        orbit_gens.append(diff)
                else:
                    rep[y] = tx
                    members.append(y)
                    queue.append(y)
        if orbit_gens:
            stab = lattice_basis(int_matrix(np.array(orbit_gens).T, (d, len(orbit_gens))), d)
        else:
            stab = np.zeros((d, 0), dtype=object)
        basis = stab if basis is None else lattice_intersection(basis, stab)
    if basis is None:
        basis = identity(d)
    return basis, limited


def kernel_lattice(action) -> np.ndarray:
    """Columns generate ``K = {t : phi_t = identity}``.

    For atomic actions with a finite window only the window is certified;
    check ``action.window_limited``.
    """
    if isinstance(action, (FieldSpec,)):
        action = action.action
    if isinstance(action, DirectSumField):
        parts = [kernel_lattice(p.action) for p in action.parts]
        out = identity(action.d)
        for b in parts:
            out = lattice_intersection(out, b)
        return out
    if isinstance(action, TranslationAction):
        d = action.d
        B = int_matrix(np.vstack([action.P, action.Q]), (2 * action.dim, d))
        K = integer_kernel(B, d)
        if action.flips:
            K = lattice_intersection(K, congruence_lattice(int_matrix(action.flip_parity), 2))
        return lattice_basis(K, d) if K.shape[1] else K
    if isinstance(action, AtomicAction):
        gens = action.generators

        def step(i, x):
            y = int(gens[i][x])
            return None if y < 0 else y

        basis, _ = _schreier_lattice(action.d, action.n_atoms, step)
        return basis
    if isinstance(action, LatticeShiftAction):
        d = action.d
        K = integer_kernel(int_matrix(action.shifts), d)
        perms = action.label_perms
        labels, _ = _schreier_lattice(d, action.n_labels, lambda i, x: int(perms[i][x]))
        return lattice_intersection(K, labels)
    if isinstance(action, CoordinateShiftAction):
        return np.zeros((action.d, 0), dtype=object)
    raise TypeError(f"no kernel lattice for {type(action).__name__}")


# ------------------------------------------------------ effective structure


def _solve_rational(A, b):
    """Solve the square system ``A x = b`` over Q (returns None if singular)."""
    n = len(A)
    M = [[Fraction(v) for v in row] + [Fraction(bv)] for row, bv in zip(A, b)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return None
        M[c], M[piv] = M[piv], M[c]
        inv = 1 / M[c][c]
        M[c] = [v * inv for v in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [a - f * b_ for a, b_ in zip(M[r], M[c])]
    return [M[r][n] for r in range(n)]


def _rational_inverse(W):
    n = W.shape[0]
    cols = []
    for j in range(n):
        e = [int(i == j) for i in range(n)]
        x = _solve_rational([[int(v) for v in row] for row in W], e)
        if x is None:
            raise RankDeficient("matrix is singular")
        cols.append(x)
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def _round_half(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


@dataclass
class EffectiveStructure:
    """Quotient data of ``Z^d / K``.

    ``coords(y)`` maps an index to its torsion class and its coordinates in
    the free part; ``coset_reps[k]`` has torsion class ``torsion_classes[k]``.
    """

    d: int
    K_basis: np.ndarray
    p: int
    l: int
    F_basis: np.ndarray
    coset_reps: list
    W: np.ndarray
    invariant_factors: tuple
    torsion_factors: tuple
    U: np.ndarray = field(repr=False)
    torsion_rows: tuple = field(repr=False, default=())
    window_limited: bool = False

    @property
    def q(self) -> int:
        return self.K_basis.shape[1]

    @property
    def degenerate(self) -> bool:
        """``p == 0``: the field takes finitely many distinct values."""
        return self.p == 0

    @property
    def torsion_classes(self) -> list:
        return list(itertools.product(*[range(f) for f in self.torsion_factors]))

    def keymap(self) -> KeyMap:
        U = np.array(self.U.tolist(), dtype=np.int64)
        rows = list(self.torsion_rows) + list(range(self.q, self.d))
        mods = [f for f in self.torsion_factors] + [0] * self.p
        return KeyMap(U[rows].reshape(len(rows), self.d), np.array(mods, dtype=np.int64))

    def coords(self, y):
        km = self.keymap()
        key = km.keys(np.asarray(y, dtype=np.int64).reshape(1, -1))[0]
        nt = len(self.torsion_factors)
        return tuple(int(v) for v in key[:nt]), tuple(int(v) for v in key[nt:])

    def to_json(self) -> str:
        def mat(a):
            return [[int(v) for v in row] for row in np.asarray(a, dtype=object)]
        return json.dumps({
            "d": self.d, "p": self.p, "l": self.l, "q": self.q,
            "K_basis": mat(self.K_basis), "F_basis": mat(self.F_basis), "W": mat(self.W),
            "coset_reps": [[int(v) for v in x] for x in self.coset_reps],
            "invariant_factors": list(self.invariant_factors),
            "degenerate": self.degenerate, "window_limited": self.window_limited,
        }, sort_keys=True)


def _reduce_against(v, basis):
    """Shorten ``v`` by an integer combination of ``basis`` columns (rounded
    least squares); the coset ``v + span(basis)`` is unchanged."""
    if basis.shape[1] == 0:
        return v
    B = [[int(x) for x in row] for row in basis]
    q = basis.shape[1]
    gram = [[sum(B[k][i] * B[k][j] for k in range(len(B))) for j in range(q)] for i in range(q)]
    rhs = [sum(B[k][i] * int(v[k]) for k in range(len(B))) for i in range(q)]
    c = _solve_rational(gram, rhs)
    if c is None:
        return v
    coef = int_matrix([_round_half(x) for x in c], (q, 1))
    return (int_matrix(v, (len(v), 1)) - basis @ coef)[:, 0]


def effective_structure(action) -> EffectiveStructure:
    """Free rank ``p``, torsion order ``l``, complement ``F``, cosets and ``W``."""
    K = kernel_lattice(action)
    inner = action.action if isinstance(action, FieldSpec) else action
    d = K.shape[0]
    q = K.shape[1]
    if q:
        U, Ui, D, _, _ = _snf(K)
        factors = tuple(int(D[i, i]) for i in range(q))
    else:
        U, Ui, factors = identity(d), identity(d), ()
    torsion_rows = tuple(i for i, f in enumerate(factors) if f > 1)
    torsion = tuple(factors[i] for i in torsion_rows)
    l = math.prod(torsion) if torsion else 1
    p = d - q
    F = Ui[:, q:].copy()
    for j in range(p):
        F[:, j] = _reduce_against(F[:, j], K)
    W = np.hstack([F, K]) if q else F.copy()
    Winv = _rational_inverse(W) if W.shape[1] == d else None
    reps = []
    for res in itertools.product(*[range(f) for f in torsion]):
        x = np.zeros(d, dtype=object)
        for r, i in zip(res, torsion_rows):
            x = x + Ui[:, i] * r
        x = np.array([int(v) for v in x], dtype=object)
        if Winv is not None:
            eta = [sum(Winv[i][k] * int(x[k]) for k in range(d)) for i in range(d)]
            shift = int_matrix([_round_half(e) for e in eta], (d, 1))
            x = (int_matrix(x, (d, 1)) - W @ shift)[:, 0]
        reps.append(tuple(int(v) for v in x))
    return EffectiveStructure(d, K, p, l, F, reps, W, factors, torsion, U, torsion_rows,
                              bool(getattr(inner, "window_limited", False)))


# --------------------------------------------------------------- polytopes


def _frac_text(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _normalize(a, b):
    """Scale ``a.x <= b`` to coprime integer coefficients."""
    den = 1
    for v in list(a) + [b]:
        den = den * v.denominator // math.gcd(den, v.denominator)
    ints = [int(v * den) for v in list(a) + [b]]
    g = 0
    for v in ints:
        g = math.gcd(g, abs(v))
    g = g or 1
    return tuple(Fraction(v // g) for v in ints[:-1]), Fraction(ints[-1] // g)


@dataclass
class HRepPolytope:
    """``{x : a_i . x <= b_i}`` with exact rational data."""

    constraints: list

    def __post_init__(self):
        self.constraints = [(tuple(Fraction(v) for v in a), Fraction(b)) for a, b in self.constraints]

    @property
    def dim(self) -> int:
        return len(self.constraints[0][0]) if self.constraints else 0

    def contains(self, x) -> bool:
        return all(sum(ai * Fraction(xi) for ai, xi in zip(a, x)) <= b for a, b in self.constraints)

    def contains_float(self, pts) -> np.ndarray:
        A = np.array([[float(v) for v in a] for a, _ in self.constraints])
        b = np.array([float(b) for _, b in self.constraints])
        return np.all(pts @ A.T <= b + 1e-12, axis=1)

    def vertices(self) -> list:
        p = self.dim
        verts = set()
        for combo in itertools.combinations(range(len(self.constraints)), p):
            A = [self.constraints[i][0] for i in combo]
            b = [self.constraints[i][1] for i in combo]
            x = _solve_rational(A, b)
            if x is not None and self.contains(x):
                verts.add(tuple(x))
        return sorted(verts)

    def is_bounded(self) -> bool:
        from scipy.optimize import linprog
        if not self.constraints:
            return False
        A = np.array([[float(v) for v in a] for a, _ in self.constraints])
        b = np.array([float(v) for _, v in self.constraints])
        for i in range(self.dim):
            for sgn in (1, -1):
                c = np.zeros(self.dim)
                c[i] = -sgn
                res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * self.dim, method="highs")
                if res.status == 3:
                    return False
        return True

    def is_symmetric(self) -> bool:
        own = {(_normalize(a, b)) for a, b in self.constraints}
        return all(_normalize(tuple(-v for v in a), b) in own for a, b in self.constraints)

    def to_text(self) -> str:
        return "\n".join(" ".join(_frac_text(v) for v in a) + " <= " + _frac_text(b)
                         for a, b in self.constraints) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "HRepPolytope":
        cons = []
        for line in text.strip().splitlines():
            if not line.strip():
                continue
            lhs, rhs = line.split("<=")
            cons.append((tuple(Fraction(v) for v in lhs.split()), Fraction(rhs.strip())))
        return cls(cons)


def _affine_rank(points) -> int:
    if len(points) <= 1:
        return 0
    base = points[0]
    rows = [[Fraction(a) - Fraction(b) for a, b in zip(p, base)] for p in points[1:]]
    rank, col = 0, 0
    ncols = len(base)
    while rank < len(rows) and col < ncols:
        piv = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if piv is None:
            col += 1
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col] / rows[rank][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
        col += 1
    return rank


def fourier_motzkin(constraints, n_keep: int):
    """Eliminate variables ``n_keep..n-1`` from ``a.x <= b`` exactly.

    Chernikov's rule drops rows combined from more than ``k + 1`` original
    rows after ``k`` eliminations; duplicates are merged after each step.
    """
    rows = {}
    for idx, (a, b) in enumerate(constraints):
        key = _normalize(tuple(Fraction(v) for v in a), Fraction(b))
        rows.setdefault(key, frozenset([idx]))
    n = len(constraints[0][0])
    eliminated = 0
    for var in range(n - 1, n_keep - 1, -1):
        pos, neg, zero = [], [], []
        for (a, b), hist in rows.items():
            (pos if a[var] > 0 else neg if a[var] < 0 else zero).append((a, b, hist))
        eliminated += 1
        new = {}
        for a, b, hist in zero:
            new[(a[:var] + a[var + 1:], b)] = hist
        for ap, bp, hp in pos:
            for an, bn, hn in neg:
                hist = hp | hn
                if len(hist) > eliminated + 1:
                    continue
                lp, ln = -an[var], ap[var]
                a = tuple(lp * x + ln * y for x, y in zip(ap, an))
                a = a[:var] + a[var + 1:]
                b = lp * bp + ln * bn
                if all(v == 0 for v in a):
                    if b < 0:
                        raise ValueError("infeasible system")
                    continue
                key = _normalize(a, b)
                if key not in new or len(hist) < len(new[key]):
                    new[key] = hist
        rows = new
    return [(a, b) for (a, b) in rows]


def _prune_to_facets(poly: HRepPolytope) -> HRepPolytope:
    verts = poly.vertices()
    p = poly.dim
    keep = []
    for a, b in poly.constraints:
        tight = [v for v in verts if sum(ai * vi for ai, vi in zip(a, v)) == b]
        if len(tight) >= p and _affine_rank(tight) == p - 1:
            if (a, b) not in keep:
                keep.append((a, b))
    return HRepPolytope(sorted(keep))


def project_polytope(W, p: int) -> HRepPolytope:
    """H-representation of ``pi(P)``, ``P = {x in R^r : |W x|_inf <= 1}``,
    ``pi`` the projection onto the first ``p`` coordinates."""
    W = np.asarray(W, dtype=object)
    d, r = W.shape
    if p < 1 or p > r:
        raise ValueError("need 1 <= p <= r")
    if lattice_rank(W) != r:
        raise RankDeficient("W must have full column rank")
    cons = []
    for i in range(d):
        row = tuple(Fraction(int(v)) for v in W[i])
        cons.append((row, Fraction(1)))
        cons.append((tuple(-v for v in row), Fraction(1)))
    projected = fourier_motzkin(cons, p)
    return _prune_to_facets(HRepPolytope(projected))


def lattice_rank(M) -> int:
    M = np.asarray(M, dtype=object)
    if M.size == 0:
        return 0
    return len(invariant_factors(M))


def _triangulate(face, dim, verts, constraints):
    """Simplices (tuples of vertex indices) triangulating a face of given dim."""
    if dim == 0:
        return [(face[0],)]
    apex = face[0]
    simplices = []
    seen = set()
    for a, b in constraints:
        sub = tuple(i for i in face if sum(x * y for x, y in zip(a, verts[i])) == b)
        if len(sub) == len(face) or len(sub) < dim or sub in seen:
            continue
        if _affine_rank([verts[i] for i in sub]) != dim - 1:
            continue
        seen.add(sub)
        if apex in sub:
            continue
        for s in _triangulate(sub, dim - 1, verts, constraints):
            simplices.append((apex,) + s)
    return simplices


def polytope_volume(Q: HRepPolytope, max_dim: int = 4) -> Fraction:
    """Exact volume by vertex enumeration and a pulling triangulation."""
    p = Q.dim
    if p > max_dim:
        raise ValueError(f"dimension {p} exceeds the cap {max_dim}")
    verts = Q.vertices()
    if _affine_rank(verts) < p:
        return Fraction(0)
    total = Fraction(0)
    for simplex in _triangulate(tuple(range(len(verts))), p, verts, Q.constraints):
        base = verts[simplex[0]]
        rows = [[Fraction(x) - Fraction(y) for x, y in zip(verts[i], base)] for i in simplex[1:]]
        total += abs(_det_frac(rows))
    return total / math.factorial(p)


def _det_frac(rows) -> Fraction:
    A = [list(r) for r in rows]
    n = len(A)
    out = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            out = -out
        out *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return out


def effective_volume(struct: EffectiveStructure) -> Fraction:
    """Volume of ``pi{x : |W x|_inf <= 1}``: the density of the sets F_n."""
    if struct.p == 0:
        return Fraction(1)
    return polytope_volume(project_polytope(struct.W, struct.p))


# ---------------------------------------------------------------- counting


@dataclass
class LatticeCount:
    n: int
    H: int
    per_coset: dict


def count_lattice(struct: EffectiveStructure, n: int, budget: int = 50_000_000) -> LatticeCount:
    """Exact ``|H_n|`` and ``|F_{k,n}|``: the distinct (coset, free coordinate)
    pairs met by the box ``[-n, n]^d``."""
    n = int(n)
    est = (2 * n + 1) * max(1, struct.l) * (2 * n * int(np.abs(np.array(struct.U.tolist())).sum()) + 1) ** max(
        struct.p - 1, 0)
    if est > budget:
        raise BudgetExceeded(f"counting at n={n} exceeds the enumeration budget")
    km = struct.keymap()
    keys, _ = box_keys(km, -n, n)
    nt = len(struct.torsion_factors)
    per = {}
    classes = {c: k for k, c in enumerate(struct.torsion_classes)}
    reps_class = [struct.coords(x)[0] for x in struct.coset_reps]
    for cls, k in classes.items():
        per[reps_class.index(cls)] = 0
    if nt:
        tors = [tuple(int(v) for v in row) for row in keys[:, :nt]]
        for c in tors:
            per[reps_class.index(c)] += 1
    else:
        per[0] = len(keys)
    return LatticeCount(n, len(keys), dict(sorted(per.items())))


def count_lattice_brute(struct: EffectiveStructure, n: int) -> LatticeCount:
    """Reference count by listing every box point (small ``n`` and ``d`` only)."""
    d = struct.d
    pts = np.indices((2 * n + 1,) * d).reshape(d, -1).T - n
    seen = set()
    per = {k: 0 for k in range(len(struct.coset_reps))}
    reps_class = [struct.coords(x)[0] for x in struct.coset_reps]
    for y in pts:
        c, a = struct.coords(y)
        if (c, a) not in seen:
            seen.add((c, a))
            k = reps_class.index(c)
            per[k] += 1
    return LatticeCount(n, len(seen), dict(sorted(per.items())))


@dataclass
class SandwichReport:
    c: int
    d_const: int
    N: int
    n_max: int
    ok: bool


def sandwich_check(struct: EffectiveStructure, n_max: int = 200, chunk: int = 2_000_000) -> SandwichReport:
    """Verify ``U_k(x_k + G_[n/d]) <= [-n1, n1] <= U_k(x_k + G_cn)`` for
    ``N <= n <= n_max`` by enumeration, with explicit constants."""
    d = struct.d
    W = np.array(struct.W.tolist(), dtype=np.int64)
    if W.shape[1] != d:
        raise RankDeficient("W must be square")
    Winv = _rational_inverse(struct.W)
    den = 1
    for row in Winv:
        for v in row:
            den = den * v.denominator // math.gcd(den, v.denominator)
    adj = np.array([[int(v * den) for v in row] for row in Winv], dtype=np.int64)
    winv_norm = max(sum(abs(v) for v in row) for row in Winv)
    c_prime = max(1, math.ceil(winv_norm))
    reps = np.array(struct.coset_reps, dtype=np.int64).reshape(-1, d)
    M = int(np.abs(reps).max()) + 1 if len(reps) else 1
    c = c_prime * M
    w_norm = int(np.abs(W).sum(axis=1).max())
    d_const = 2 * w_norm
    N = max(1, 2 * (M - 1))
    ok = True

    # first inclusion: |x_k + W eta|_inf <= max(N, d_const |eta|_inf)
    m_max = n_max // d_const
    etas = np.indices((2 * m_max + 1,) * d).reshape(d, -1).T - m_max
    eta_norm = np.abs(etas).max(axis=1)
    for x in reps:
        pts = x[None, :] + etas @ W.T
        ok &= bool(np.all(np.abs(pts).max(axis=1) <= np.maximum(N, d_const * eta_norm)))

    # second inclusion: every y with |y| <= n_max lies in x_k + G_{c max(N, |y|)}
    km = struct.keymap()
    nt = len(struct.torsion_factors)
    reps_class = {struct.coords(x)[0]: x for x in reps}
    side = 2 * n_max + 1
    rows_per = max(1, chunk // side ** (d - 1))
    rest = np.indices((side,) * (d - 1)).reshape(d - 1, -1).T - n_max if d > 1 else np.zeros((1, 0), dtype=np.int64)
    for start in range(-n_max, n_max + 1, rows_per):
        firsts = np.arange(start, min(n_max + 1, start + rows_per))
        ys = np.hstack([np.repeat(firsts, len(rest))[:, None], np.tile(rest, (len(firsts), 1))])
        keys = km.keys(ys)
        base = np.zeros_like(ys)
        if nt:
            for cls, x in reps_class.items():
                sel = np.all(keys[:, :nt] == np.array(cls), axis=1)
                base[sel] = x
        else:
            base[:] = reps[0]
        eta_scaled = (ys - base) @ adj.T
        if np.any(eta_scaled % den):
            ok = False
        eta = np.abs(eta_scaled // den).max(axis=1)
        ok &= bool(np.all(eta <= c * np.maximum(N, np.abs(ys).max(axis=1))))
    return SandwichReport(c, d_const, N, n_max, bool(ok))
