"""Rank reduction: boundary moves, extreme-point counts, point extraction."""

import numpy as np
import pytest

from sepqcqp.errors import StaleSolutionError, StructureError
from sepqcqp.qcqp_model import Qcqp, QuadFunc, Relation, hom_values, lift
from sepqcqp.rank_reduction import (
    BlockKind,
    ExtractResult,
    block_kinds_of,
    extract_point,
    reduce,
)
from sepqcqp.sdp_solver import solve
from sepqcqp.sdpr_builder import (
    BlockSdp,
    Row,
    SdpSolution,
    SolveStatus,
    build_hom,
    build_shor,
    eval_rows,
    to_standard_form,
)
from sepqcqp.symkernel import SymMatrix, numeric_rank, psd_factor

from test_sdp_solver import family_value, two_block_family


def sym(rows):
    if isinstance(rows, SymMatrix):
        return rows
    return SymMatrix.from_dense(np.asarray(rows, dtype=float))


def hand_solution(b, blocks, value, slacks=None):
    if slacks is None:
        slacks = np.zeros(b.n_rows)
    return SdpSolution(
        blocks=[sym(x) for x in blocks],
        slacks=np.asarray(slacks, dtype=float),
        dual_multipliers=np.zeros(b.n_rows),
        dual_blocks=[SymMatrix.zeros(d) for d in b.block_dims],
        status=SolveStatus.OPTIMAL,
        value=value,
    )


def max_residual(b, sol):
    vals = eval_rows(b, sol.blocks) + sol.slacks * np.array(
        [row.slack_coeff for row in b.rows], dtype=float
    )
    rhs = np.array([row.rhs for row in b.rows])
    return float(np.abs(vals - rhs).max(initial=0.0))


def min_eig(blk):
    x = blk.to_dense()
    return float(np.linalg.eigvalsh(x).min()) if x.size else 0.0


class TestTraceIdentity:
    def test_interior_point_walks_to_rank_one(self):
        # min <I, X> s.t. <I, X> = 1: every feasible point is optimal, so
        # reduction from the center I/2 must reach a rank-one extreme point
        b = BlockSdp(
            (2,),
            (SymMatrix.identity(2),),
            [Row((SymMatrix.identity(2),), 0, 1.0)],
        )
        sol0 = hand_solution(b, [0.5 * np.eye(2)], 1.0)
        red, rep = reduce(b, sol0)
        assert rep.final_ranks == [1]
        assert rep.pataki_sum == 1
        assert rep.bound_m == 1
        assert rep.iterations >= 1
        assert red.value == pytest.approx(1.0, abs=1e-9)
        assert max_residual(b, red) <= 1e-8
        assert min_eig(red.blocks[0]) >= -1e-10
        assert rep.extracted is not None

    def test_trace_three_dims(self):
        b = BlockSdp(
            (4,),
            (SymMatrix.identity(4),),
            [Row((SymMatrix.identity(4),), 0, 2.0)],
        )
        sol0 = hand_solution(b, [0.5 * np.eye(4)], 2.0)
        red, rep = reduce(b, sol0)
        assert rep.final_ranks == [1]
        assert red.value == pytest.approx(2.0, abs=1e-8)


class TestZeroIterations:
    def test_rank_one_input_is_left_alone(self):
        # min u^2 s.t. u^2 = 1, seeded with the lift of u = 1
        q = Qcqp(
            1,
            QuadFunc.from_parts([[1.0]]),
            [(QuadFunc.from_parts([[1.0]]), Relation.EQ)],
            [1.0],
        )
        b = to_standard_form(build_shor(q))
        sol0 = hand_solution(b, [lift(np.array([1.0]))], 1.0)
        red, rep = reduce(b, sol0)
        assert rep.iterations == 0
        assert rep.final_ranks == [1]
        assert np.allclose(
            red.blocks[0].to_dense(),
            lift(np.array([1.0])).to_dense(),
            atol=1e-12,
        )
        assert rep.extracted is not None
        assert rep.extracted[0] == pytest.approx([1.0], abs=1e-9)


class TestBenchmarkFamily:
    def solve_reduced(self, alpha, tol=1e-7):
        b = to_standard_form(build_hom(two_block_family(alpha)))
        sol = solve(b)
        assert sol.status is SolveStatus.OPTIMAL
        return b, reduce(b, sol, tol=tol)

    def test_alpha_one_ranks(self):
        b, (red, rep) = self.solve_reduced(1.0)
        assert rep.final_ranks == [1, 1]
        assert rep.bound_m == 3
        assert rep.pataki_sum <= rep.bound_m
        assert red.value == pytest.approx(-1.0, abs=1e-6)
        assert rep.extracted is not None

    def test_alpha_three_block(self):
        b, (red, rep) = self.solve_reduced(3.0)
        assert rep.final_ranks[0] == 1
        assert np.allclose(
            red.blocks[0].to_dense(), [[9.0, 3.0], [3.0, 1.0]], atol=1e-5
        )
        ext = extract_point(red, block_kinds_of(b))
        assert ext.ok
        assert ext.points[0] == pytest.approx([3.0, 1.0], abs=1e-5)

    def test_alpha_midpoint_cannot_extract(self):
        # strictly inside the gap interval the first block stays rank two
        b, (red, rep) = self.solve_reduced(2.5)
        assert rep.final_ranks[0] == 2
        assert rep.extracted is None
        assert red.value == pytest.approx(22.0 / 3.0, abs=1e-6)
        ext = extract_point(red, block_kinds_of(b))
        assert not ext.ok
        assert ext.failed_block == 0

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0, 3.0, 3.5])
    def test_round_trip_recovers_optimum(self, alpha):
        h = two_block_family(alpha)
        b, (red, rep) = self.solve_reduced(alpha)
        assert rep.extracted is not None
        vs = rep.extracted
        vals = hom_values(h, vs)
        for k, (rel, rhs) in enumerate(zip(h.relations, h.rhs)):
            assert rel.holds(vals[k + 1], rhs, 1e-5)
        assert vals[0] == pytest.approx(family_value(alpha), abs=1e-5)
        assert vals[0] == pytest.approx(red.value, abs=1e-5)


class TestExtractPoint:
    def lifted_solution(self, mats, slack_count=0):
        return SdpSolution(
            blocks=[sym(x) for x in mats],
            slacks=np.zeros(slack_count),
            dual_multipliers=np.zeros(slack_count),
            dual_blocks=[SymMatrix.zeros(np.shape(x)[0]) for x in mats],
            status=SolveStatus.OPTIMAL,
            value=0.0,
        )

    def test_inhomogeneous_lift_round_trip(self):
        sol = self.lifted_solution([[[9.0, 3.0], [3.0, 1.0]]])
        out = extract_point(sol, [BlockKind.INHOMOGENEOUS])
        assert out.ok
        assert out.points[0] == pytest.approx([3.0], abs=1e-10)

    def test_negative_corner_factor_is_flipped(self):
        # g g^T with g = (3, -1) lifts u = -3 after normalizing the corner
        sol = self.lifted_solution([np.outer([3.0, -1.0], [3.0, -1.0])])
        out = extract_point(sol, [BlockKind.INHOMOGENEOUS])
        assert out.ok
        assert out.points[0] == pytest.approx([-3.0], abs=1e-10)

    def test_corner_magnitude_mismatch_fails(self):
        sol = self.lifted_solution([np.outer([2.0, 1.1], [2.0, 1.1])])
        out = extract_point(sol, [BlockKind.INHOMOGENEOUS])
        assert not out.ok
        assert out.failed_block == 0
        assert "corner" in out.reason

    def test_zero_inhomogeneous_block_fails(self):
        sol = self.lifted_solution([np.zeros((2, 2))])
        out = extract_point(sol, [BlockKind.INHOMOGENEOUS])
        assert not out.ok
        assert out.failed_block == 0

    def test_zero_homogeneous_block_gives_zero_vector(self):
        sol = self.lifted_solution([np.zeros((3, 3))])
        out = extract_point(sol, [BlockKind.HOMOGENEOUS])
        assert out.ok
        assert out.points[0] == pytest.approx([0.0, 0.0, 0.0], abs=0)

    def test_homogeneous_sign_convention(self):
        sol = self.lifted_solution([np.outer([-2.0, 1.0], [-2.0, 1.0])])
        out = extract_point(sol, [BlockKind.HOMOGENEOUS])
        assert out.ok
        assert out.points[0] == pytest.approx([2.0, -1.0], abs=1e-10)

    def test_rank_two_reports_offender(self):
        sol = self.lifted_solution(
            [np.outer([1.0, 1.0], [1.0, 1.0]), np.eye(2)]
        )
        out = extract_point(
            sol, [BlockKind.INHOMOGENEOUS, BlockKind.HOMOGENEOUS]
        )
        assert not out.ok
        assert out.failed_block == 1
        assert "rank" in out.reason

    def test_kind_count_mismatch(self):
        sol = self.lifted_solution([np.eye(2)])
        with pytest.raises(StructureError):
            extract_point(sol, [BlockKind.HOMOGENEOUS, BlockKind.HOMOGENEOUS])

    def test_block_kinds_of_marks_pinned_blocks(self):
        q = Qcqp(
            1,
            QuadFunc.from_parts([[1.0]]),
            [(QuadFunc.from_parts([[1.0]]), Relation.LE)],
            [1.0],
        )
        assert block_kinds_of(build_shor(q)) == [BlockKind.INHOMOGENEOUS]
        assert block_kinds_of(build_hom(two_block_family(1.0))) == [
            BlockKind.HOMOGENEOUS,
            BlockKind.HOMOGENEOUS,
        ]


class TestGuards:
    def tiny_problem(self):
        return BlockSdp(
            (2,),
            (SymMatrix.identity(2),),
            [Row((SymMatrix.identity(2),), 0, 1.0)],
        )

    def test_rejects_nonstandard_form(self):
        b = BlockSdp(
            (2,),
            (SymMatrix.identity(2),),
            [Row((SymMatrix.identity(2),), -1, 1.0)],
        )
        sol0 = SdpSolution(
            blocks=[sym(np.eye(2))],
            slacks=np.ones(1),
            dual_multipliers=np.zeros(1),
            dual_blocks=[SymMatrix.zeros(2)],
            status=SolveStatus.OPTIMAL,
            value=2.0,
        )
        with pytest.raises(StructureError):
            reduce(b, sol0)

    def test_rejects_nonoptimal_status(self):
        b = self.tiny_problem()
        sol0 = SdpSolution(
            blocks=[sym(0.5 * np.eye(2))],
            slacks=np.zeros(1),
            dual_multipliers=np.zeros(1),
            dual_blocks=[SymMatrix.zeros(2)],
            status=SolveStatus.MAX_ITER,
            value=1.0,
        )
        with pytest.raises(StaleSolutionError):
            reduce(b, sol0)

    def test_rejects_shape_mismatch(self):
        b = self.tiny_problem()
        sol0 = SdpSolution(
            blocks=[sym(0.5 * np.eye(2)), sym(np.eye(1))],
            slacks=np.zeros(1),
            dual_multipliers=np.zeros(1),
            dual_blocks=[SymMatrix.zeros(2), SymMatrix.zeros(1)],
            status=SolveStatus.OPTIMAL,
            value=1.0,
        )
        with pytest.raises(StaleSolutionError):
            reduce(b, sol0)

    def test_rejects_infeasible_input(self):
        b = self.tiny_problem()
        sol0 = hand_solution(b, [np.eye(2)], 2.0)  # trace 2 != 1
        with pytest.raises(StaleSolutionError):
            reduce(b, sol0)


def random_equality_instance(seed, with_slack_rows=0):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(3, 7))
    m = int(rng.integers(2, 6))
    x0 = rng.standard_normal((dim, dim))
    x0 = x0 @ x0.T + dim * np.eye(dim)
    s0 = rng.standard_normal((dim, dim))
    s0 = s0 @ s0.T + dim * np.eye(dim)
    y0 = rng.standard_normal(m)
    amats = [0.5 * (a + a.T) for a in rng.standard_normal((m, dim, dim))]
    cmat = s0 + sum(y * a for y, a in zip(y0, amats))
    rows = [
        Row((SymMatrix.from_dense(a),), 0, float(np.sum(a * x0)))
        for a in amats
    ]
    for k in range(with_slack_rows):
        a = rng.standard_normal((dim, dim))
        a = 0.5 * (a + a.T)
        margin = float(rng.uniform(0.5, 2.0))
        rows.append(
            Row((SymMatrix.from_dense(a),), 1, float(np.sum(a * x0)) + margin)
        )
    return BlockSdp((dim,), (SymMatrix.from_dense(cmat),), rows)


class TestInvariants:
    @pytest.mark.parametrize("seed", range(5))
    def test_equality_instances(self, seed):
        b = random_equality_instance(seed)
        sol = solve(b)
        assert sol.status is SolveStatus.OPTIMAL
        tol = 1e-7
        budget = sum(
            psd_factor(blk, tol=1e-9).shape[1] for blk in sol.blocks
        )
        red, rep = reduce(b, sol, tol=tol)
        rhs_scale = 1.0 + max(abs(row.rhs) for row in b.rows)
        assert max_residual(b, red) <= 10 * tol * rhs_scale
        assert abs(red.value - sol.value) <= tol * (1.0 + abs(sol.value))
        assert rep.iterations <= budget
        assert rep.pataki_sum <= rep.bound_m
        assert min_eig(red.blocks[0]) >= -1e-7

    @pytest.mark.parametrize("seed", range(5))
    def test_slack_instances(self, seed):
        b = random_equality_instance(200 + seed, with_slack_rows=2)
        sol = solve(b)
        assert sol.status is SolveStatus.OPTIMAL
        tol = 1e-7
        smax = float(np.abs(sol.slacks).max(initial=0.0))
        budget = sum(
            psd_factor(blk, tol=1e-9).shape[1] for blk in sol.blocks
        ) + int(np.sum(sol.slacks > tol * (1.0 + smax)))
        red, rep = reduce(b, sol, tol=tol)
        rhs_scale = 1.0 + max(abs(row.rhs) for row in b.rows)
        assert max_residual(b, red) <= 10 * tol * rhs_scale
        assert abs(red.value - sol.value) <= tol * (1.0 + abs(sol.value))
        assert rep.iterations <= budget
        assert rep.pataki_sum <= rep.bound_m
        assert np.all(red.slacks >= 0.0)

    @pytest.mark.parametrize("seed", range(4))
    def test_two_row_homogeneous_blocks_end_rank_one(self, seed):
        # with two rows the extreme-point count forces blockwise rank <= 1
        rng = np.random.default_rng(300 + seed)
        dims = (2, 2)
        v0 = []
        for d in dims:
            g = rng.standard_normal((d, d))
            v0.append(g @ g.T + d * np.eye(d))
        amats = [
            [0.5 * (a + a.T) for a in rng.standard_normal((2, d, d))]
            for d in dims
        ]
        cs = []
        for d in dims:
            g = rng.standard_normal((d, d))
            cs.append(g @ g.T + d * np.eye(d))
        rows = [
            Row(
                tuple(SymMatrix.from_dense(amats[bi][k]) for bi in range(2)),
                0 if k == 0 else 1,
                sum(float(np.sum(amats[bi][k] * v0[bi])) for bi in range(2))
                + (0.0 if k == 0 else 1.0),
            )
            for k in range(2)
        ]
        b = BlockSdp(dims, tuple(SymMatrix.from_dense(c) for c in cs), rows)
        sol = solve(b)
        assert sol.status is SolveStatus.OPTIMAL
        red, rep = reduce(b, sol)
        assert rep.pataki_sum <= 2
        assert all(r <= 1 for r in rep.final_ranks)
