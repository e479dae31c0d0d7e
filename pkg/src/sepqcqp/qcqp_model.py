"""Problem data model for quadratically constrained quadratic programs.

A quadratic function in n variables with zero constant term is carried in
homogenized form: f(u) = (u; 1)^T B (u; 1) with B symmetric of dimension
n+1 and corner entry [B]_{n+1,n+1} = 0. A Qcqp minimizes one such function
subject to rows f_k(u) <= / = / >= delta_k.

Several sub-QCQPs couple into a connected problem by sharing the
right-hand-side budget: sum_p f^p_k(u^p) <= gamma_k. Blocks interact only
through these row sums, never through shared variables. A purely quadratic
variant (no linear or constant terms, no homogenization coordinate) is kept
in HomSepQcqp with per-block coefficient matrices C^q_k.

The brute-force grid search at the bottom is the desk-scale oracle used to
cross-check relaxation values on problems with at most 4 variables.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, StructureError
from .symkernel import SymMatrix, frob_inner


class Relation(enum.Enum):
    LE = "le"
    EQ = "eq"
    GE = "ge"

    @property
    def symbol(self) -> str:
        return {"le": "<=", "eq": "=", "ge": ">="}[self.value]

    def holds(self, lhs: float, rhs: float, tol: float) -> bool:
        if self is Relation.LE:
            return lhs <= rhs + tol
        if self is Relation.EQ:
            return abs(lhs - rhs) <= tol
        return lhs >= rhs - tol


class QuadFunc:
    """Quadratic function f(u) = u^T Q u + 2 b^T u in homogenized matrix form.

    B has dimension n+1 with Q in the leading n x n block, b in the last
    column, and the corner pinned to zero (f(0) = 0 by convention).
    """

    __slots__ = ("n", "B")

    def __init__(self, n: int, B: SymMatrix):
        if B.dim != n + 1:
            raise DimensionError(f"B has dim {B.dim}, expected n+1 = {n + 1}")
        if B[n, n] != 0.0:
            raise ValueError(f"corner entry must be exactly 0, got {B[n, n]!r}")
        self.n = n
        self.B = B

    @staticmethod
    def from_parts(quad, linear=None) -> "QuadFunc":
        """Build from an n x n quadratic part and optional linear vector b."""
        quad = np.asarray(quad, dtype=np.float64)
        if quad.ndim != 2 or quad.shape[0] != quad.shape[1]:
            raise DimensionError(f"quadratic part must be square, got {quad.shape}")
        n = quad.shape[0]
        hom = np.zeros((n + 1, n + 1))
        hom[:n, :n] = 0.5 * (quad + quad.T)
        if linear is not None:
            b = np.asarray(linear, dtype=np.float64).reshape(-1)
            if b.shape != (n,):
                raise DimensionError(f"linear part has shape {b.shape}, expected ({n},)")
            hom[:n, n] = b
            hom[n, :n] = b
        return QuadFunc(n, SymMatrix.from_dense(hom))

    @staticmethod
    def zero(n: int) -> "QuadFunc":
        return QuadFunc(n, SymMatrix.zeros(n + 1))

    def quad_part(self) -> SymMatrix:
        dense = self.B.to_dense()
        return SymMatrix.from_dense(dense[: self.n, : self.n])

    def linear_part(self) -> np.ndarray:
        return self.B.to_dense()[: self.n, self.n].copy()

    def is_zero(self) -> bool:
        return self.B.is_zero()

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at many points at once; pts has shape (N, n)."""
        dense = self.B.to_dense()
        q = dense[: self.n, : self.n]
        b = dense[: self.n, self.n]
        return np.einsum("ni,ij,nj->n", pts, q, pts) + 2.0 * pts @ b

    def __repr__(self) -> str:
        return f"QuadFunc(n={self.n})"


def eval(f: QuadFunc, u) -> float:  # noqa: A001 - spec-level operation name
    """Evaluate f at u: (u; 1)^T B (u; 1)."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.shape != (f.n,):
        raise DimensionError(f"point has shape {u.shape}, expected ({f.n},)")
    z = np.append(u, 1.0)
    return float(z @ f.B.to_dense() @ z)


def lift(u) -> SymMatrix:
    """Rank-one lift ((u u^T, u), (u^T, 1)); the matrix a QCQP point induces."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    z = np.append(u, 1.0)
    return SymMatrix.from_dense(np.outer(z, z))


class Qcqp:
    """min f_0(u) s.t. f_k(u) <relation_k> rhs_k, u in R^n."""

    __slots__ = ("n", "objective", "constraints", "rhs")

    def __init__(self, n, objective: QuadFunc, constraints, rhs):
        if objective.n != n:
            raise DimensionError(f"objective in {objective.n} vars, problem has {n}")
        constraints = list(constraints)
        for f, rel in constraints:
            if f.n != n:
                raise DimensionError(f"constraint in {f.n} vars, problem has {n}")
            if not isinstance(rel, Relation):
                raise StructureError(f"bad relation {rel!r}")
        rhs = np.asarray(rhs, dtype=np.float64).reshape(-1)
        if rhs.shape != (len(constraints),):
            raise DimensionError(
                f"{len(constraints)} constraints but rhs has shape {rhs.shape}"
            )
        self.n = n
        self.objective = objective
        self.constraints = constraints
        self.rhs = rhs

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def relations(self) -> list[Relation]:
        return [rel for _, rel in self.constraints]

    def __repr__(self) -> str:
        return f"Qcqp(n={self.n}, m={self.m})"


class HomSepQcqp:
    """Separable homogeneous QCQP: min sum_q <C^q_0, v^q (v^q)^T> subject to
    sum_q <C^q_k, v^q (v^q)^T> <relation_k> rhs_k.

    blocks[q] is the list [C^q_0, C^q_1, ..., C^q_m] of coefficient
    matrices for block q (objective first). No homogenization coordinate:
    the functions are purely quadratic.
    """

    __slots__ = ("blocks", "relations", "rhs")

    def __init__(self, blocks, relations, rhs):
        blocks = [list(mats) for mats in blocks]
        if not blocks:
            raise StructureError("need at least one block")
        relations = list(relations)
        rhs = np.asarray(rhs, dtype=np.float64).reshape(-1)
        m = len(relations)
        if rhs.shape != (m,):
            raise DimensionError(f"{m} relations but rhs has shape {rhs.shape}")
        for q, mats in enumerate(blocks):
            if len(mats) != m + 1:
                raise DimensionError(
                    f"block {q} has {len(mats)} matrices, expected m+1 = {m + 1}"
                )
            d = mats[0].dim
            for k, c in enumerate(mats):
                if c.dim != d:
                    raise DimensionError(
                        f"block {q} matrix {k} has dim {c.dim}, expected {d}"
                    )
        for rel in relations:
            if not isinstance(rel, Relation):
                raise StructureError(f"bad relation {rel!r}")
        self.blocks = blocks
        self.relations = relations
        self.rhs = rhs

    @property
    def q_hat(self) -> int:
        return len(self.blocks)

    @property
    def m(self) -> int:
        return len(self.relations)

    @property
    def dims(self) -> list[int]:
        return [mats[0].dim for mats in self.blocks]

    def __repr__(self) -> str:
        return f"HomSepQcqp(q_hat={self.q_hat}, dims={self.dims}, m={self.m})"


class SeparableQcqp:
    """Horizontal connection of sub-QCQPs sharing one rhs budget gamma.

    Each entry of blocks is a Qcqp or a HomSepQcqp; all entries carry the
    same relation list, and per-entry rhs vectors are ignored in favor of
    gamma. Row k of the connected problem reads
    sum_p f^p_k(u^p) <relation_k> gamma_k.
    """

    __slots__ = ("blocks", "gamma")

    def __init__(self, blocks, gamma):
        blocks = list(blocks)
        if not blocks:
            raise StructureError("need at least one block")
        rels0 = _block_relations(blocks[0])
        for p, blk in enumerate(blocks[1:], start=1):
            if _block_relations(blk) != rels0:
                raise StructureError(
                    f"block {p} relation list differs from block 0"
                )
        gamma = np.asarray(gamma, dtype=np.float64).reshape(-1)
        if gamma.shape != (len(rels0),):
            raise DimensionError(
                f"gamma has shape {gamma.shape}, expected ({len(rels0)},)"
            )
        self.blocks = blocks
        self.gamma = gamma

    @property
    def p_hat(self) -> int:
        return len(self.blocks)

    @property
    def m(self) -> int:
        return len(self.relations)

    @property
    def relations(self) -> list[Relation]:
        return _block_relations(self.blocks[0])

    def __repr__(self) -> str:
        return f"SeparableQcqp(p_hat={self.p_hat}, m={self.m})"


def _block_relations(blk) -> list[Relation]:
    if isinstance(blk, Qcqp):
        return blk.relations
    if isinstance(blk, HomSepQcqp):
        return list(blk.relations)
    raise StructureError(f"block must be Qcqp or HomSepQcqp, got {type(blk)!r}")


def block_nvars(blk) -> int:
    """Number of scalar variables a connection entry contributes."""
    if isinstance(blk, Qcqp):
        return blk.n
    return sum(blk.dims)


# ---------------------------------------------------------------------------
# evaluation and feasibility


def is_feasible(q: Qcqp, u, tol: float) -> bool:
    """Constraint-wise feasibility within an absolute tolerance.

    LE rows need f(u) <= rhs + tol, EQ rows |f(u) - rhs| <= tol, GE rows
    f(u) >= rhs - tol.
    """
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.shape != (q.n,):
        raise DimensionError(f"point has shape {u.shape}, expected ({q.n},)")
    for (f, rel), d in zip(q.constraints, q.rhs):
        if not rel.holds(eval(f, u), float(d), tol):
            return False
    return True


def hom_values(h: HomSepQcqp, vs) -> np.ndarray:
    """Row values [g_0, g_1, ..., g_m] of a homogeneous problem at block
    points vs = [v^1, ..., v^q_hat]."""
    if len(vs) != h.q_hat:
        raise DimensionError(f"got {len(vs)} block points, expected {h.q_hat}")
    vals = np.zeros(h.m + 1)
    for mats, v in zip(h.blocks, vs):
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if v.shape != (mats[0].dim,):
            raise DimensionError(
                f"block point has shape {v.shape}, expected ({mats[0].dim},)"
            )
        for k, c in enumerate(mats):
            vals[k] += float(v @ c.to_dense() @ v)
    return vals


# ---------------------------------------------------------------------------
# composition


def connect(subs, gamma) -> SeparableQcqp:
    """Connect sub-QCQPs through a shared rhs vector gamma.

    Relation lists must agree where defined; a sub-QCQP with fewer
    constraints than the longest is padded with identically-zero
    constraints carrying the longer list's relations (a redundant row).
    """
    subs = list(subs)
    if not subs:
        raise StructureError("need at least one sub-QCQP")
    rel_lists = [_block_relations(s) for s in subs]
    target = max(rel_lists, key=len)
    m = len(target)
    for p, rels in enumerate(rel_lists):
        if rels != target[: len(rels)]:
            raise StructureError(
                f"sub-QCQP {p} relations {[r.value for r in rels]} are not a "
                f"prefix of {[r.value for r in target]}"
            )
    padded = []
    for s, rels in zip(subs, rel_lists):
        k_missing = m - len(rels)
        if k_missing == 0:
            padded.append(s)
        elif isinstance(s, Qcqp):
            cons = list(s.constraints) + [
                (QuadFunc.zero(s.n), rel) for rel in target[len(rels):]
            ]
            rhs = np.concatenate([s.rhs, np.zeros(k_missing)])
            padded.append(Qcqp(s.n, s.objective, cons, rhs))
        else:
            blocks = [
                mats + [SymMatrix.zeros(mats[0].dim)] * k_missing
                for mats in s.blocks
            ]
            rhs = np.concatenate([s.rhs, np.zeros(k_missing)])
            padded.append(HomSepQcqp(blocks, list(target), rhs))
    return SeparableQcqp(padded, gamma)


def hom_to_qcqp(h: HomSepQcqp) -> SeparableQcqp:
    """Rewrite each homogeneous block as an inhomogeneous sub-QCQP.

    Each C^q_k embeds into the top-left corner of a (n+1)-dim homogenized
    matrix with zero linear border, so evaluation agrees pointwise.
    """
    subs = []
    for mats in h.blocks:
        n = mats[0].dim
        funcs = []
        for c in mats:
            hom = np.zeros((n + 1, n + 1))
            hom[:n, :n] = c.to_dense()
            funcs.append(QuadFunc(n, SymMatrix.from_dense(hom)))
        subs.append(
            Qcqp(n, funcs[0], list(zip(funcs[1:], h.relations)), h.rhs)
        )
    return SeparableQcqp(subs, h.rhs)


def flatten(s: SeparableQcqp) -> Qcqp:
    """Collapse a connection into one QCQP over the concatenated variables.

    Functions add across blocks and blocks share no variables, so the
    combined coefficient matrices are block-diagonal in the quadratic part
    with stacked linear parts. Used by the brute-force oracle path.
    """
    entries = []
    for blk in s.blocks:
        if isinstance(blk, HomSepQcqp):
            entries.extend(hom_to_qcqp(blk).blocks)
        else:
            entries.append(blk)
    n_tot = sum(b.n for b in entries)
    m = s.m

    def combined(k: int) -> QuadFunc:
        quad = np.zeros((n_tot, n_tot))
        lin = np.zeros(n_tot)
        ofs = 0
        for b in entries:
            f = b.objective if k < 0 else b.constraints[k][0]
            dense = f.B.to_dense()
            quad[ofs : ofs + b.n, ofs : ofs + b.n] = dense[: b.n, : b.n]
            lin[ofs : ofs + b.n] = dense[: b.n, b.n]
            ofs += b.n
        return QuadFunc.from_parts(quad, lin)

    cons = [(combined(k), rel) for k, rel in enumerate(s.relations)]
    return Qcqp(n_tot, combined(-1), cons, s.gamma)


def split_point(s: SeparableQcqp, u) -> list[np.ndarray]:
    """Split a flat point of flatten(s) back into per-entry block points.

    Returns one vector per connection entry; a homogeneous entry gets the
    concatenation of its q-block coordinates.
    """
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    out = []
    ofs = 0
    for blk in s.blocks:
        w = block_nvars(blk)
        out.append(u[ofs : ofs + w].copy())
        ofs += w
    if ofs != u.shape[0]:
        raise DimensionError(f"point has {u.shape[0]} coords, expected {ofs}")
    return out


# ---------------------------------------------------------------------------
# brute-force oracle

#: returned as the value when no feasible grid point exists
INFEASIBLE = math.inf


def brute_force(
    q: Qcqp,
    box,
    grid_points: int = 11,
    refine_rounds: int = 4,
    feas_tol: float = 1e-6,
):
    """Grid search with successive box-halving refinement around the incumbent.

    box is one (lo, hi) pair applied to every coordinate, or a list of n
    pairs. Each round lays a grid_points-per-axis grid on the current box,
    keeps the best feasible point, then halves the box around it. Returns
    (value, point); (math.inf, None) when no feasible grid point was found.

    Only intended for q.n <= 4 (the grid is exponential in n). The reported
    value is an upper bound on the true minimum that tightens with rounds.
    """
    if q.n > 4:
        raise DimensionError(f"brute force limited to n <= 4, got n = {q.n}")
    if grid_points < 11:
        raise ValueError("grid_points must be at least 11")
    if q.n == 0:
        return 0.0, np.zeros(0)

    pairs = np.asarray(box, dtype=np.float64)
    if pairs.shape == (2,):
        pairs = np.tile(pairs, (q.n, 1))
    if pairs.shape != (q.n, 2) or np.any(pairs[:, 0] > pairs[:, 1]):
        raise DimensionError(f"bad box for n = {q.n}: {box!r}")

    centers = 0.5 * (pairs[:, 0] + pairs[:, 1])
    widths = pairs[:, 1] - pairs[:, 0]

    cons_f = [f for f, _ in q.constraints]
    rels = q.relations
    best_val = INFEASIBLE
    best_pt = None

    for _ in range(refine_rounds + 1):
        los = np.maximum(pairs[:, 0], centers - 0.5 * widths)
        his = np.minimum(pairs[:, 1], centers + 0.5 * widths)
        axes = [np.linspace(lo, hi, grid_points) for lo, hi in zip(los, his)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)

        feas = np.ones(pts.shape[0], dtype=bool)
        for f, rel, d in zip(cons_f, rels, q.rhs):
            vals = f.eval_many(pts)
            if rel is Relation.LE:
                feas &= vals <= d + feas_tol
            elif rel is Relation.GE:
                feas &= vals >= d - feas_tol
            else:
                feas &= np.abs(vals - d) <= feas_tol
            if not feas.any():
                break

        if feas.any():
            obj = q.objective.eval_many(pts[feas])
            i = int(np.argmin(obj))
            if float(obj[i]) < best_val:
                best_val = float(obj[i])
                best_pt = pts[feas][i].copy()

        if best_pt is None:
            return INFEASIBLE, None
        centers = best_pt
        widths = 0.5 * widths

    return best_val, best_pt
