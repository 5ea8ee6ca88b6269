"""The brute-force model search: weak orders, model checking, hulls."""

import itertools
from fractions import Fraction

import pytest

from conftest import rand_extended, rand_workflow
from twf.allen import Interval, RelationSet, interval
from twf.extended import variable_paths
from twf.qcn import Qcn
from twf.semantics import (
    AtomBudgetError,
    NotExecutedError,
    check_model,
    enumerate_instances,
    execution_times,
    find_model,
    hull,
    weak_orders,
)
from twf.workflow import (
    atom,
    conj,
    disj,
    loop,
    rename_occurrences,
    seq,
)


def count_weak_orders_directly(m: int) -> int:
    """Weak orders of the 2m endpoints with start < end, counted naively.

    Enumerates every layer assignment whose values form an initial segment
    of the integers; deliberately independent of the production enumerator.
    """
    n = 2 * m
    if n == 0:
        return 1
    count = 0
    for assignment in itertools.product(range(n), repeat=n):
        used = set(assignment)
        if used != set(range(len(used))):
            continue
        if all(assignment[2 * a] < assignment[2 * a + 1] for a in range(m)):
            count += 1
    return count


class TestWeakOrders:
    @pytest.mark.parametrize("m", [0, 1, 2, 3])
    def test_count_matches_direct_enumeration(self, m):
        assert sum(1 for _ in weak_orders(m)) == count_weak_orders_directly(m)

    def test_two_atoms_cover_all_thirteen_relations(self):
        from twf.allen import relation_between

        seen = set()
        for layers in weak_orders(2):
            i = Interval(Fraction(layers[0]), Fraction(layers[1]))
            j = Interval(Fraction(layers[2]), Fraction(layers[3]))
            seen.add(relation_between(i, j))
        assert len(seen) == 13

    def test_le_pairs_respected(self):
        for layers in weak_orders(2, le_pairs=[(1, 2)]):
            assert layers[1] <= layers[2]

    def test_deterministic(self):
        assert list(weak_orders(2)) == list(weak_orders(2))


class TestCheckModel:
    def test_sequence_respected(self):
        w = rename_occurrences(seq(atom("alpha"), atom("beta")))
        (inst,), _ = enumerate_instances(w, 1)
        a, b = (x.occ for x in inst.atoms)
        assert check_model(inst, {a: interval(0, 1), b: interval(2, 3)})
        assert check_model(inst, {a: interval(0, 1), b: interval(1, 2)})

    def test_sequence_violated(self):
        w = rename_occurrences(seq(atom("alpha"), atom("beta")))
        (inst,), _ = enumerate_instances(w, 1)
        a, b = (x.occ for x in inst.atoms)
        assert not check_model(inst, {a: interval(0, 2), b: interval(1, 3)})

    def test_conjunction_imposes_no_order(self):
        w = rename_occurrences(conj(atom("alpha"), atom("beta")))
        (inst,), _ = enumerate_instances(w, 1)
        a, b = (x.occ for x in inst.atoms)
        assert check_model(inst, {a: interval(0, 2), b: interval(1, 3)})

    def test_missing_assignment_raises(self):
        w = rename_occurrences(conj(atom("alpha"), atom("beta")))
        (inst,), _ = enumerate_instances(w, 1)
        with pytest.raises(KeyError):
            check_model(inst, {inst.atoms[0].occ: interval(0, 1)})


class TestFindModel:
    def test_every_plain_workflow_has_a_model(self, rng):
        for _ in range(40):
            w = rand_workflow(rng, max_depth=3, max_leaves=4)
            model = find_model(w, unroll_bound=2)
            assert model is not None
            assert check_model(model.instance, model.assignment)

    def test_before_is_irreflexive(self):
        w = rename_occurrences(atom("alpha"))
        net = Qcn.universal(("v",)).set_constraint("v", "v", RelationSet.parse("b"))
        assert find_model(w, net, {"v": ()}) is None

    def test_counterexample_workflow_is_satisfiable(self):
        w = rename_occurrences(
            disj(conj(atom("alpha"), atom("beta")), conj(atom("gamma"), atom("delta")))
        )
        net = Qcn.universal(("alpha", "gamma", "delta"))
        net = net.set_constraint("alpha", "gamma", RelationSet.parse("b"))
        net = net.set_constraint("gamma", "delta", RelationSet.parse("b"))
        net = net.set_constraint("delta", "alpha", RelationSet.parse("b"))
        paths = {"alpha": ("L", "L"), "gamma": ("R", "L"), "delta": ("R", "R")}
        model = find_model(w, net, paths)
        assert model is not None
        assert model.resolution.choices[()] == "L"

    def test_budget_exceeded_is_distinguished(self):
        w = rename_occurrences(conj(*(atom(n) for n in "abcdefgh")))
        with pytest.raises(AtomBudgetError):
            find_model(w, atom_budget=7)
        assert find_model(w, atom_budget=16) is not None

    def test_self_constraint_on_unexecuted_branch_is_vacuous(self):
        # p {b} p rules out executing p, but the other branch still works
        w = rename_occurrences(disj(atom("p"), atom("q")))
        net = Qcn.universal(("p",)).set_constraint("p", "p", RelationSet.parse("b"))
        model = find_model(w, net, {"p": ("L",)})
        assert model is not None
        assert model.resolution.choices[()] == "R"

    def test_loop_hull_spans_all_iterations(self):
        # with the loop unrolled twice, its interval runs from the first
        # iteration's start to the last iteration's end
        w = rename_occurrences(seq(loop(atom("x")), atom("z")))
        instances, _ = enumerate_instances(w, 2)
        inst = next(i for i in instances if len(i.atoms) == 3)
        x1, x2, z = (a.occ for a in inst.atoms)
        net = Qcn.universal(("lp", "z")).set_constraint("lp", "z", RelationSet.parse("m"))
        paths = {"lp": ("L",), "z": ("R",)}
        meeting = {x1: interval(0, 1), x2: interval(1, 2), z: interval(2, 3)}
        assert check_model(inst, meeting, net, paths)
        gap = {x1: interval(0, 1), x2: interval(1, 2), z: interval(3, 4)}
        assert not check_model(inst, gap, net, paths)

    def test_returned_models_verify(self, rng):
        for _ in range(25):
            ew = rand_extended(rng)
            paths = variable_paths(ew)
            try:
                model = find_model(ew.workflow, ew.network, paths, unroll_bound=2)
            except AtomBudgetError:
                continue
            if model is not None:
                assert check_model(model.instance, model.assignment, ew.network, paths)


class TestExecutionTimes:
    def test_leaf_times_are_its_interval(self):
        w = rename_occurrences(seq(atom("alpha"), atom("beta")))
        model = find_model(w)
        times = execution_times(model, ("L",))
        assert times == (model.assignment[model.instance.atoms[0].occ],)

    def test_hull_spans_union(self):
        assert hull([interval(0, 1), interval(3, 4)]) == interval(0, 4)
        with pytest.raises(ValueError):
            hull([])

    def test_sequence_hull(self):
        w = rename_occurrences(seq(atom("alpha"), atom("beta")))
        (inst,), _ = enumerate_instances(w, 1)
        a, b = (x.occ for x in inst.atoms)
        assignment = {a: interval(0, 1), b: interval(2, 3)}
        from twf.semantics import Model

        model = Model(inst, assignment)
        assert hull(execution_times(model, ())) == interval(0, 3)

    def test_additivity(self, rng):
        # times of a composite are exactly the union of its parts' times
        from twf.workflow import iter_nodes, Atomic

        for _ in range(15):
            w = rand_workflow(rng, max_depth=3, max_leaves=4, allow_loops=False)
            model = find_model(w)
            for path, node in iter_nodes(w):
                if isinstance(node, Atomic):
                    continue
                try:
                    whole = set(execution_times(model, path))
                except NotExecutedError:
                    continue
                parts = set()
                from twf.workflow import children

                for step, _ in children(node):
                    try:
                        parts.update(execution_times(model, path + (step,)))
                    except NotExecutedError:
                        pass
                assert whole == parts

    def test_unexecuted_branch_raises(self):
        w = rename_occurrences(disj(atom("p"), atom("q")))
        model = find_model(w)
        chosen = model.resolution.choices[()]
        other = "R" if chosen == "L" else "L"
        assert execution_times(model, (chosen,))
        with pytest.raises(NotExecutedError):
            execution_times(model, (other,))
