import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bessmarket.clearing import build_llp
from bessmarket.lp import INF, LinearModel
from bessmarket.solver import (INFEASIBLE, OPTIMAL, SolveRequest, SolverError, cbc_command,
                               find_cbc, read_mps, reference_bnb, reference_simplex, run_external,
                               write_mps)
from bessmarket.solver.external import parse_cbc_solution, parse_generic_solution

from cases import merit_order, micro

needs_cbc = pytest.mark.skipif(find_cbc() is None, reason="no CBC binary available")


def tiny_lp():
    m = LinearModel("tiny")
    x = m.add_var("x", 0, INF, 1.0)
    y = m.add_var("y", 0, INF, 2.0)
    m.add_row("c1", [(x, 1), (y, 1)], "G", 3.0)
    m.add_row("c2", [(x, 1), (y, -1)], "L", 1.0)
    return m


def knapsack(values, weights, cap):
    m = LinearModel("knap")
    cols = [m.add_binary(f"b{j}") for j in range(len(values))]
    for c, v in zip(cols, values):
        m.set_cost(c, -v)
    m.add_row("w", list(zip(cols, weights)), "L", cap)
    return m


class TestMps:
    def test_round_trip(self, tmp_path):
        m = knapsack([3, 4.5, 1e-17], [2, 3, 1], 4)
        m.add_var("free", -INF, INF, 0.25)
        back, ind = read_mps(write_mps(m, tmp_path / "k.mps"))
        assert ind == []
        for attr in ("col_names", "lb", "ub", "cost", "integer", "row_names", "sense", "rhs"):
            assert getattr(back, attr) == getattr(m, attr)
        assert (back.matrix() != m.matrix()).nnz == 0

    def test_markers_and_free_tag(self, tmp_path):
        text = write_mps(knapsack([1, 2], [1, 1], 1), tmp_path / "k.mps").read_text()
        assert text.startswith("NAME knap FREE")
        assert "'INTORG'" in text and "'INTEND'" in text

    def test_indicator_section(self, tmp_path):
        m = knapsack([1, 2], [1, 1], 1)
        path = write_mps(m, tmp_path / "k.mps", indicators=[("w", "b0", 1)])
        assert "INDICATORS" in path.read_text()
        assert read_mps(path)[1] == [("w", "b0", 1)]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.data())
    def test_random_models_survive(self, n, r, data):
        import tempfile
        fl = st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=False)
        m = LinearModel("rnd")
        for j in range(n):
            lo = data.draw(st.one_of(st.just(-INF), fl))
            m.add_var(f"c{j}", lo, data.draw(st.one_of(st.just(INF), st.floats(lo if lo > -INF else -1e6, 1e6))),
                      data.draw(fl), data.draw(st.booleans()))
        for i in range(r):
            terms = [(j, data.draw(fl)) for j in range(n) if data.draw(st.booleans())]
            m.add_row(f"r{i}", terms, data.draw(st.sampled_from("GLE")), data.draw(fl))
        with tempfile.TemporaryDirectory() as d:
            back, _ = read_mps(write_mps(m, f"{d}/m.mps"))
        for attr in ("lb", "ub", "cost", "integer", "sense", "rhs"):
            assert getattr(back, attr) == getattr(m, attr)
        assert np.array_equal(back.matrix().toarray(), m.matrix().toarray())


class TestExternal:
    def test_default_runner_lp(self):
        res = run_external(SolveRequest(tiny_lp()))
        assert res.status == OPTIMAL
        assert res.x == pytest.approx([2, 1], abs=1e-9)
        assert res.objective == pytest.approx(4.0)
        assert res.duals is not None

    def test_infeasible_model(self):
        m = LinearModel("inf")
        x = m.add_var("x", 0, 1)
        m.add_row("c", [(x, 1)], "G", 2)
        assert run_external(SolveRequest(m)).status == INFEASIBLE

    def test_failing_command(self):
        with pytest.raises(SolverError, match="exited with"):
            run_external(SolveRequest(tiny_lp()), "false {model} {solution}")

    def test_missing_placeholders(self):
        with pytest.raises(SolverError):
            run_external(SolveRequest(tiny_lp()), "true")

    def test_indicators_rejected_by_default_runner(self):
        m = knapsack([1, 2], [1, 1], 1)
        with pytest.raises(SolverError, match="exited with 4"):
            run_external(SolveRequest(m, indicators=[("w", "b0", 1)]))

    @needs_cbc
    def test_cbc_matches_default(self):
        m = knapsack([5, 4, 3, 2], [4, 3, 2, 1], 6)
        a = run_external(SolveRequest(m))
        b = run_external(SolveRequest(m), cbc_command())
        assert a.objective == pytest.approx(b.objective, rel=1e-9)

    @needs_cbc
    def test_cbc_clears_micro_market(self):
        llp = build_llp(micro())
        a = run_external(SolveRequest(llp.lp))
        b = run_external(SolveRequest(llp.lp), cbc_command())
        assert b.objective == pytest.approx(a.objective, rel=1e-8)


class TestParsers:
    def test_cbc_listing_with_rows(self):
        text = ("Optimal - objective value 4.00000000\n"
                "      0 c1          3          1\n"
                "      1 c2          1          0\n"
                "      0 x           2          0\n"
                "      1 y           1          0\n")
        status, obj, vals, duals = parse_cbc_solution(text, ["x", "y"], ["c1", "c2"])
        assert (status, obj) == (OPTIMAL, 4.0)
        assert vals == {"x": 2.0, "y": 1.0}
        assert duals == {"c1": 1.0, "c2": 0.0}

    def test_cbc_infeasible(self):
        assert parse_cbc_solution("Infeasible - objective value 0\n", [], [])[0] == INFEASIBLE

    def test_generic_sections(self):
        text = "status optimal\nobjective 4.0\ngap 0.0\n[columns]\nx 2\ny 1\n[duals]\nc1 1\n"
        status, obj, vals, duals, gap = parse_generic_solution(text)
        assert (status, obj, gap) == (OPTIMAL, 4.0, 0.0)
        assert vals == {"x": 2.0, "y": 1.0} and duals == {"c1": 1.0}

    def test_generic_garbage(self):
        with pytest.raises(SolverError):
            parse_generic_solution("x 1 2\n")

    def test_lost_variable(self):
        tpl = "echo 'status optimal' > {solution}; echo 'x 1' >> {solution}; true {model}"
        with pytest.raises(SolverError, match="lacks"):
            run_external(SolveRequest(tiny_lp()), tpl)


class TestReferenceSimplex:
    def test_tiny(self):
        res = reference_simplex(tiny_lp())
        assert res.objective == pytest.approx(4.0, abs=1e-12)
        assert res.duals == pytest.approx([1.5, -0.5], abs=1e-9)

    def test_merit_order_price(self):
        llp = build_llp(merit_order())
        res = reference_simplex(llp.lp)
        assert res.duals[llp.balance_rows[0, 0]] == pytest.approx(20.0, abs=1e-9)

    def test_micro_matches_external(self):
        lp = build_llp(micro()).lp
        assert reference_simplex(lp).objective == \
            pytest.approx(run_external(SolveRequest(lp)).objective, rel=1e-8)

    def test_identity_lp(self):
        m = LinearModel()
        for j in range(4):
            c = m.add_var(f"x{j}", -INF, INF, 1.0)
            m.add_row(f"r{j}", [(c, 1)], "E", float(j))
        res = reference_simplex(m)
        assert res.x == pytest.approx([0, 1, 2, 3])

    def test_degenerate_lp_terminates(self):
        # many constraints active at the optimum vertex
        m = LinearModel()
        x = m.add_var("x", 0, INF, -1.0)
        y = m.add_var("y", 0, INF, -1.0)
        for k in range(6):
            m.add_row(f"r{k}", [(x, 1 + k), (y, 1)], "L", 1.0 + k)
        m.add_row("dup", [(x, 1), (y, 1)], "L", 1.0)
        res = reference_simplex(m)
        assert res.status == OPTIMAL and res.objective == pytest.approx(-1.0)

    def test_infeasible(self):
        m = LinearModel()
        x = m.add_var("x", 0, 1)
        m.add_row("c", [(x, 1)], "G", 2)
        assert reference_simplex(m).status == INFEASIBLE


class TestReferenceBnb:
    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 20), st.integers(1, 10)), min_size=1, max_size=7),
           st.integers(1, 30))
    def test_knapsack_matches_enumeration(self, items, cap):
        values, weights = zip(*items)
        best = max(sum(v for v, b in zip(values, pick) if b)
                   for pick in itertools.product((0, 1), repeat=len(items))
                   if sum(w for w, b in zip(weights, pick) if b) <= cap)
        res = reference_bnb(knapsack(values, weights, cap))
        assert -res.objective == pytest.approx(best)

    def test_all_fixed(self):
        m = knapsack([1, 2], [1, 1], 5)
        m.lb = [1.0, 0.0]
        m.ub = [1.0, 0.0]
        assert reference_bnb(m).objective == pytest.approx(-1.0)

    def test_size_guard(self):
        with pytest.raises(ValueError, match="size guard"):
            reference_bnb(knapsack([1] * 31, [1] * 31, 3))

    def test_matches_external_milp(self):
        m = knapsack([5, 4, 3, 2, 7], [4, 3, 2, 1, 5], 8)
        ext = run_external(SolveRequest(m))
        assert reference_bnb(m).objective == pytest.approx(ext.objective, rel=1e-9)
