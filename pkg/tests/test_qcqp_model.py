"""Problem model: evaluation, lifting, feasibility, composition, oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepqcqp.errors import DimensionError, StructureError
from sepqcqp.qcqp_model import (
    INFEASIBLE,
    HomSepQcqp,
    Qcqp,
    QuadFunc,
    Relation,
    SeparableQcqp,
    brute_force,
    connect,
    eval as eval_quad,
    flatten,
    hom_to_qcqp,
    hom_values,
    is_feasible,
    lift,
    split_point,
)
from sepqcqp.symkernel import SymMatrix, frob_inner

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def qf(quad, linear=None):
    return QuadFunc.from_parts(np.asarray(quad, dtype=float), linear)


class TestQuadFunc:
    def test_corner_must_be_zero(self):
        bad = SymMatrix.from_dense(np.array([[1.0, 0.0], [0.0, 0.5]]))
        with pytest.raises(ValueError):
            QuadFunc(1, bad)

    def test_dim_checked(self):
        with pytest.raises(DimensionError):
            QuadFunc(2, SymMatrix.zeros(2))

    def test_parts_round_trip(self):
        f = qf([[2.0, 1.0], [1.0, -3.0]], [4.0, -5.0])
        assert np.array_equal(
            f.quad_part().to_dense(), np.array([[2.0, 1.0], [1.0, -3.0]])
        )
        assert np.array_equal(f.linear_part(), np.array([4.0, -5.0]))

    def test_eval_frozen(self):
        # (v1 - 2 v2)(v1 - 3 v2) at (3, 1) -> 0
        f = qf([[1.0, -2.5], [-2.5, 6.0]])
        assert eval_quad(f, [3.0, 1.0]) == pytest.approx(0.0, abs=1e-12)
        assert eval_quad(f, [1.0, 0.0]) == pytest.approx(1.0, abs=1e-12)

    def test_eval_with_linear(self):
        # x^2 + 2*3x at x=2 -> 16
        f = qf([[1.0]], [3.0])
        assert eval_quad(f, [2.0]) == pytest.approx(16.0)

    def test_eval_many_matches_eval(self):
        rng = np.random.default_rng(3)
        f = qf(rng.standard_normal((3, 3)), rng.standard_normal(3))
        pts = rng.uniform(-2, 2, size=(40, 3))
        fast = f.eval_many(pts)
        slow = [eval_quad(f, p) for p in pts]
        assert np.allclose(fast, slow, atol=1e-12)


class TestLift:
    @given(seeds, st.integers(min_value=1, max_value=5))
    @settings(max_examples=50, deadline=None)
    def test_lift_reproduces_eval(self, seed, n):
        # f(u) = <B, lift(u)> is the identity the relaxation rests on
        rng = np.random.default_rng(seed)
        f = qf(rng.uniform(-1, 1, size=(n, n)), rng.uniform(-1, 1, size=n))
        u = rng.uniform(-2, 2, size=n)
        assert frob_inner(f.B, lift(u)) == pytest.approx(
            eval_quad(f, u), rel=1e-10, abs=1e-10
        )

    def test_lift_shape_and_corner(self):
        x = lift([1.0, 2.0])
        assert x.dim == 3
        assert x[2, 2] == 1.0
        assert x[0, 2] == 1.0
        assert x[1, 2] == 2.0
        assert x[0, 1] == 2.0


class TestQcqp:
    def make(self):
        obj = qf([[1.0, 0.0], [0.0, 1.0]])
        cons = [
            (qf([[1.0, 0.0], [0.0, 0.0]]), Relation.EQ),
            (qf([[0.0, 0.0], [0.0, 1.0]], [1.0, 0.0]), Relation.LE),
        ]
        return Qcqp(2, obj, cons, [1.0, 5.0])

    def test_shape(self):
        q = self.make()
        assert q.n == 2 and q.m == 2
        assert q.relations == [Relation.EQ, Relation.LE]

    def test_rhs_length_checked(self):
        with pytest.raises(DimensionError):
            Qcqp(1, qf([[1.0]]), [(qf([[1.0]]), Relation.LE)], [1.0, 2.0])

    def test_feasibility_relations(self):
        q = self.make()
        assert is_feasible(q, [1.0, 0.0], 1e-9)
        assert is_feasible(q, [-1.0, 1.0], 1e-9)
        assert not is_feasible(q, [2.0, 0.0], 1e-9)  # EQ row violated
        assert not is_feasible(q, [1.0, 3.0], 1e-9)  # LE row violated
        # tolerance is absolute
        assert is_feasible(q, [1.0 + 1e-7, 0.0], 1e-6)
        assert not is_feasible(q, [1.0 + 1e-5, 0.0], 1e-6)

    def test_ge_rows(self):
        q = Qcqp(1, qf([[1.0]]), [(qf([[1.0]]), Relation.GE)], [4.0])
        assert is_feasible(q, [2.0], 1e-9)
        assert not is_feasible(q, [1.0], 1e-9)


class TestHomSep:
    def make(self):
        c0 = [SymMatrix.identity(2), SymMatrix.from_dense(np.diag([1.0, -1.0]))]
        c1 = [SymMatrix.from_dense([[2.0]]), SymMatrix.from_dense([[1.0]])]
        return HomSepQcqp([c0, c1], [Relation.LE], [3.0])

    def test_shape(self):
        h = self.make()
        assert h.q_hat == 2 and h.m == 1 and h.dims == [2, 1]

    def test_values(self):
        h = self.make()
        vals = hom_values(h, [np.array([1.0, 2.0]), np.array([3.0])])
        # g0 = (1+4) + 2*9 = 23, g1 = (1-4) + 9 = 6
        assert vals == pytest.approx([23.0, 6.0])

    def test_block_matrix_count_checked(self):
        with pytest.raises(DimensionError):
            HomSepQcqp([[SymMatrix.identity(1)]], [Relation.LE], [0.0])

    def test_hom_to_qcqp_agrees_pointwise(self):
        h = self.make()
        s = hom_to_qcqp(h)
        assert isinstance(s, SeparableQcqp) and s.p_hat == 2
        v = [np.array([1.0, 2.0]), np.array([3.0])]
        direct = hom_values(h, v)
        emb_obj = sum(eval_quad(b.objective, vi) for b, vi in zip(s.blocks, v))
        emb_g1 = sum(eval_quad(b.constraints[0][0], vi) for b, vi in zip(s.blocks, v))
        assert emb_obj == pytest.approx(direct[0])
        assert emb_g1 == pytest.approx(direct[1])


class TestConnect:
    def test_shared_relations_enforced(self):
        a = Qcqp(1, qf([[1.0]]), [(qf([[1.0]]), Relation.LE)], [1.0])
        b = Qcqp(1, qf([[1.0]]), [(qf([[1.0]]), Relation.EQ)], [1.0])
        with pytest.raises(StructureError):
            connect([a, b], [1.0])

    def test_zero_padding(self):
        a = Qcqp(
            1,
            qf([[1.0]]),
            [(qf([[1.0]]), Relation.LE), (qf([[-1.0]]), Relation.GE)],
            [1.0, -4.0],
        )
        b = Qcqp(1, qf([[2.0]]), [(qf([[1.0]]), Relation.LE)], [1.0])
        s = connect([a, b], [2.0, -4.0])
        assert s.m == 2
        padded = s.blocks[1]
        assert padded.m == 2
        assert padded.constraints[1][0].is_zero()
        assert padded.constraints[1][1] is Relation.GE

    def test_gamma_length_checked(self):
        a = Qcqp(1, qf([[1.0]]), [(qf([[1.0]]), Relation.LE)], [1.0])
        with pytest.raises(DimensionError):
            connect([a], [1.0, 2.0])

    def test_mixed_entries(self):
        a = Qcqp(1, qf([[1.0]]), [(qf([[1.0]]), Relation.LE)], [1.0])
        h = HomSepQcqp(
            [[SymMatrix.identity(1), SymMatrix.from_dense([[1.0]])]],
            [Relation.LE],
            [1.0],
        )
        s = connect([a, h], [5.0])
        assert s.p_hat == 2 and s.m == 1


class TestFlatten:
    def test_values_add_across_blocks(self):
        a = Qcqp(1, qf([[1.0]], [1.0]), [(qf([[1.0]]), Relation.LE)], [1.0])
        b = Qcqp(2, qf([[1.0, 0.0], [0.0, 2.0]]), [(qf([[1.0, 1.0], [1.0, 0.0]]), Relation.LE)], [1.0])
        s = connect([a, b], [3.0])
        flat = flatten(s)
        assert flat.n == 3 and flat.m == 1
        u = np.array([1.5, -0.5, 2.0])
        parts = split_point(s, u)
        want_obj = eval_quad(a.objective, parts[0]) + eval_quad(b.objective, parts[1])
        want_g1 = eval_quad(a.constraints[0][0], parts[0]) + eval_quad(
            b.constraints[0][0], parts[1]
        )
        assert eval_quad(flat.objective, u) == pytest.approx(want_obj)
        assert eval_quad(flat.constraints[0][0], u) == pytest.approx(want_g1)
        assert np.array_equal(flat.rhs, s.gamma)

    def test_homogeneous_entry_expands(self):
        h = HomSepQcqp(
            [
                [SymMatrix.identity(2), SymMatrix.from_dense(np.diag([1.0, -1.0]))],
                [SymMatrix.from_dense([[2.0]]), SymMatrix.from_dense([[1.0]])],
            ],
            [Relation.LE],
            [3.0],
        )
        s = SeparableQcqp([h], [3.0])
        flat = flatten(s)
        assert flat.n == 3
        v = np.array([1.0, 2.0, 3.0])
        want = hom_values(h, [v[:2], v[2:]])
        assert eval_quad(flat.objective, v) == pytest.approx(want[0])
        assert eval_quad(flat.constraints[0][0], v) == pytest.approx(want[1])


class TestBruteForce:
    def test_unconstrained_quadratic(self):
        # min (x-2)^2 = x^2 - 4x + 4; constant dropped: min x^2 - 4x = -4 at x=2
        q = Qcqp(1, qf([[1.0]], [-2.0]), [(QuadFunc.zero(1), Relation.LE)], [0.0])
        val, pt = brute_force(q, (-5.0, 5.0), grid_points=11, refine_rounds=8)
        assert val == pytest.approx(-4.0, abs=1e-4)
        assert pt[0] == pytest.approx(2.0, abs=1e-3)

    def test_infeasible_marker(self):
        q = Qcqp(1, qf([[1.0]]), [(qf([[1.0]]), Relation.LE)], [-1.0])
        val, pt = brute_force(q, (-5.0, 5.0))
        assert val == INFEASIBLE and math.isinf(val) and pt is None

    def test_equality_on_grid(self):
        # min x2 s.t. x1^2 = 1, x2 >= x1: optimum -? with x1=-1, x2=-1... keep LE box only
        obj = qf([[0.0, 0.0], [0.0, 0.0]], [0.0, 0.5])  # f = x2
        q = Qcqp(
            2,
            obj,
            [
                (qf([[1.0, 0.0], [0.0, 0.0]]), Relation.EQ),
                (qf([[0.0, 0.0], [0.0, 1.0]]), Relation.LE),
            ],
            [1.0, 4.0],
        )
        val, pt = brute_force(q, (-5.0, 5.0), grid_points=11)
        assert val == pytest.approx(-2.0, abs=1e-9)
        assert abs(pt[0]) == pytest.approx(1.0, abs=1e-9)
        assert pt[1] == pytest.approx(-2.0, abs=1e-9)

    def test_refinement_monotone(self):
        rng = np.random.default_rng(11)
        g = rng.standard_normal((2, 2))
        q = Qcqp(
            2,
            qf(g @ g.T + 0.1 * np.eye(2), rng.standard_normal(2)),
            [(qf(np.eye(2)), Relation.LE)],
            [9.0],
        )
        prev = INFEASIBLE
        for rounds in range(0, 7):
            val, _ = brute_force(q, (-4.0, 4.0), refine_rounds=rounds)
            assert val <= prev + 1e-12
            prev = val

    def test_n_cap(self):
        q = Qcqp(5, QuadFunc.zero(5), [(QuadFunc.zero(5), Relation.LE)], [0.0])
        with pytest.raises(DimensionError):
            brute_force(q, (-1.0, 1.0))

    def test_grid_floor(self):
        q = Qcqp(1, qf([[1.0]]), [(QuadFunc.zero(1), Relation.LE)], [0.0])
        with pytest.raises(ValueError):
            brute_force(q, (-1.0, 1.0), grid_points=5)

    def test_per_coordinate_box(self):
        # min x1 + x2 over [0,1] x [2,3] -> 2 at (0, 2) (no constraints binding)
        obj = qf(np.zeros((2, 2)), [0.5, 0.5])
        q = Qcqp(2, obj, [(QuadFunc.zero(2), Relation.LE)], [0.0])
        val, pt = brute_force(q, [(0.0, 1.0), (2.0, 3.0)])
        assert val == pytest.approx(2.0, abs=1e-9)
        assert pt == pytest.approx([0.0, 2.0], abs=1e-9)
