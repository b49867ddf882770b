import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sistables.bounds import BudgetExceeded, enumerate_fiber, verify_sequential_interval
from sistables.model import (
    ConstraintSystem,
    build_constraint_system,
    compute_margin,
    genotype_diagonal_first_order,
    genotype_spec,
    reorder_cells,
    routing_spec,
)
from sistables.toric import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    Binomial,
    GroebnerBasis,
    Limits,
    MoveSet,
    PositivitySupport,
    TermOrder,
    buchberger,
    certify_toric_membership,
    check_corollary_5_1,
    check_lemma_4_2,
    check_prop_3_1,
    check_prop_4_1,
    column_weights,
    connectivity_check,
    ideal_quotient,
    markov_basis,
    normal_form,
    positive_support,
    read_moves,
    s_pairs_reduce_to_zero,
    saturate,
    toric_ideal,
    write_moves,
)

from conftest import fixture, independence_system

LEX4 = TermOrder.lex(4)
MINOR = Binomial((1, 0, 0, 1), (0, 1, 1, 0))  # x1 x4 - x2 x3


def _minor_basis():
    return buchberger([MINOR], LEX4)


def _lex_subbasis(system):
    """Lex basis elements square-free in their first variable."""
    gb = toric_ideal(system)
    keep = [g for g in gb.elements if g.degree_in(min(g.support())) <= 1]
    return MoveSet.from_binomials(keep)


def test_normal_form_examples():
    G = _minor_basis()
    assert normal_form((1, 0, 0, 1), G) == (0, 1, 1, 0)
    assert normal_form((0, 1, 1, 0), G) == (0, 1, 1, 0)
    assert G.contains(Binomial((2, 0, 0, 2), (0, 2, 2, 0)))
    assert not G.contains(Binomial((1, 0, 0, 0), (0, 1, 0, 0)))


def test_buchberger_small_cases():
    assert buchberger([Binomial((1, 0), (0, 1))], TermOrder.lex(2)).canonical() == (((1, 0), (0, 1)),)
    G = _minor_basis()
    assert G.canonical() == ((MINOR.lead, MINOR.trail),)
    assert G.reduced


def test_term_orders():
    lex = TermOrder.lex(3)
    assert lex.greater((1, 0, 0), (0, 5, 5))
    grev = TermOrder.grevlex(3)
    assert grev.greater((0, 2, 0), (1, 0, 0))
    # equal degree: the monomial with the smaller last exponent is larger
    assert grev.greater((1, 1, 0), (1, 0, 1))
    rev = TermOrder.reversed_grevlex(3)
    assert rev.greater((0, 0, 1), (1, 0, 0))
    with pytest.raises(ValueError):
        TermOrder.lex(3, (0, 0, 1))


def test_three_by_three_minors():
    S = independence_system(3, 3)
    gb = toric_ideal(S)
    assert len(gb) == 9
    assert all(max(g.lead) == 1 and sum(g.lead) == 2 for g in gb.elements)
    assert check_prop_3_1(S).verdict == PASS
    moves = MoveSet.from_binomials(gb.elements)
    rng = np.random.default_rng(0)
    for _ in range(5):
        t = compute_margin(S, rng.integers(0, 4, 9))
        assert connectivity_check(moves, S, t)


def test_linear_toric_ideal():
    S = ConstraintSystem(np.array([[1, 1]]), ("1", "2"))
    assert toric_ideal(S).canonical() == (((1, 0), (0, 1)),)
    rep = check_corollary_5_1(S)
    assert rep.verdict == PASS and rep.details["lower"] == PASS and rep.details["upper"] == PASS


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.data())
def test_routing_closed_form(e, f, data):
    cols = [data.draw(st.lists(st.integers(0, 1), min_size=e, max_size=e).filter(any)) for _ in range(f)]
    A0 = np.array(cols, dtype=int).T
    S = build_constraint_system(routing_spec(A0))
    gb = toric_ideal(S)
    expected = sorted((tuple(int(i == k) for k in range(f)) + (0,) * e, (0,) * f + tuple(A0[:, i])) for i in range(f))
    assert sorted(gb.canonical()) == expected
    assert check_prop_3_1(S).verdict == PASS


def test_saturation_examples():
    I = [Binomial((1, 1, 0), (1, 0, 1))]  # x1 x2 - x1 x3
    sat = saturate(I, (1, 0, 0))
    assert sat.contains(Binomial((0, 1, 0), (0, 0, 1)))
    again = saturate(sat.elements, (1, 0, 0))
    assert again.canonical() == sat.canonical()
    lattice = [MINOR]
    assert saturate(lattice, (1, 1, 1, 1), LEX4).canonical() == _minor_basis().canonical()


def test_saturation_recovers_toric_ideal():
    # a lattice basis of the 2 x 3 independence model generates less than the toric ideal
    S = independence_system(2, 3)
    order = TermOrder.grevlex(6)
    lattice = [Binomial.from_move(m, order) for m in ([1, -1, 0, -1, 1, 0], [0, 1, -1, 0, -1, 1])]
    sat = saturate(lattice, (1,) * 6, order)
    assert sat.canonical() == toric_ideal(S, order).canonical()


def test_quotient_examples():
    I = [Binomial((1, 1, 0), (1, 0, 1))]
    q = ideal_quotient(I, (1, 0, 0), TermOrder.lex(3))
    assert q.canonical() == (((0, 1, 0), (0, 0, 1)),)
    # f coprime to every generator: nothing changes
    K = [Binomial((1, 0, 0), (0, 1, 0))]
    q = ideal_quotient(K, (0, 0, 2), TermOrder.lex(3))
    assert q.canonical() == (((1, 0, 0), (0, 1, 0)),)
    q = ideal_quotient([MINOR], (1, 1, 1, 1), LEX4, weights=(1, 1, 1, 1))
    assert q.canonical() == _minor_basis().canonical()


def test_quotient_by_positive_cells(czech):
    S = czech.system()
    support = positive_support(S, czech.margin())
    moves = _lex_subbasis(S)
    assert len(moves) == 19
    assert check_lemma_4_2(moves, S, support)


def test_square_free_check_negative_witness(czech):
    rep = check_prop_3_1(czech.system())
    assert rep.verdict == FAIL
    assert rep.details["basis_size"] == 20
    w = rep.witness
    assert w["cell"] == 0 and w["cell_label"] == "111111" and w["exponent"] == 2 and w["element_index"] == 0


def test_square_free_check_budget_is_inconclusive(czech):
    rep = check_prop_3_1(czech.system(), Limits(max_pairs=5))
    assert rep.verdict == INCONCLUSIVE


def test_subbasis_check_on_retained_moves(czech):
    S = czech.system()
    rep = check_prop_4_1(_lex_subbasis(S), S)
    assert rep.verdict == PASS
    assert rep.details["groebner"] == rep.details["square_free"] == rep.details["saturation"] == PASS


def test_subbasis_check_square_free_lex_basis():
    S = independence_system(3, 3)
    assert check_prop_4_1(MoveSet.from_binomials(toric_ideal(S).elements), S).verdict == PASS


def test_subbasis_check_not_a_groebner_basis():
    S = independence_system(2, 4)
    moves = MoveSet(((1, -1, 0, 0, -1, 1, 0, 0), (1, 0, -1, 0, -1, 0, 1, 0)))
    rep = check_prop_4_1(moves, S)
    assert rep.verdict == FAIL and rep.details["groebner"] == FAIL
    assert rep.witness["condition"] == 1
    ok, rem = s_pairs_reduce_to_zero(moves.binomials(TermOrder.lex(8)), TermOrder.lex(8))
    assert not ok and rem is not None


def test_moves_must_be_in_the_kernel():
    with pytest.raises(ValueError):
        check_prop_4_1(MoveSet(((1, 0, 0, 0),)), independence_system(2, 2))


def test_quotient_markov_check_trivial_cases():
    S = independence_system(3, 3)
    full = MoveSet(tuple(markov_basis(S.matrix)))
    t = compute_margin(S, [1] * 9)
    assert check_lemma_4_2(full, S, PositivitySupport(()))
    assert not check_lemma_4_2(MoveSet(()), S, PositivitySupport(()))
    # one minor together with positivity of every cell is still not enough
    one = MoveSet(((1, -1, 0, -1, 1, 0, 0, 0, 0),))
    assert not check_lemma_4_2(one, S, positive_support(S, t))


def test_positive_support():
    S = ConstraintSystem(np.eye(3, dtype=int), ("a", "b", "c"))
    assert positive_support(S, (1, 2, 3)).indices == (0, 1, 2)
    assert positive_support(independence_system(2, 2), (0, 0, 0, 0)).indices == ()


def test_positive_support_is_positive_on_fiber(czech):
    S, t = czech.system(), czech.margin()
    support = positive_support(S, t)
    tables = enumerate_fiber(S, t)
    for j in support.indices:
        assert min(tb.counts[j] for tb in tables) > 0
    assert len(support.indices) == 51


def test_lp_ip_check_case_control(breslow):
    rep = check_corollary_5_1(breslow.system())
    assert rep.verdict == PASS
    assert rep.details["lower"] == PASS and rep.details["upper"] == PASS


def test_lp_ip_check_upper_fails_from_first_cell(czech):
    S = czech.system()
    rep = check_corollary_5_1(S)
    assert rep.details["upper"] == FAIL and rep.details["first_upper_failure"] == 0
    assert rep.details["lower"] == FAIL
    support = positive_support(S, czech.margin())
    rep = check_corollary_5_1(S, subbasis=_lex_subbasis(S), support=support)
    assert rep.details["lower_subbasis"]["reason"].startswith("a subbasis lead")


def test_reduced_basis_is_unique():
    S = fixture("dsmall-3x3x3").system()
    order = TermOrder.lex(S.num_cells)
    gb = toric_ideal(S, order)
    gens = [Binomial.from_move(m) for m in markov_basis(S.matrix)]
    random.Random(0).shuffle(gens)
    again = buchberger(gens, order, weights=column_weights(S))
    assert again.canonical() == gb.canonical()
    assert s_pairs_reduce_to_zero(gb.elements, order)[0]


def test_membership_certificate():
    S = reorder_cells(build_constraint_system(genotype_spec(4)), genotype_diagonal_first_order(4))
    gb = toric_ideal(S)
    assert certify_toric_membership(gb, S.matrix, np.random.default_rng(1))
    partial = GroebnerBasis([g for g in gb.elements if g.lead[0] == 0], gb.order)
    assert not certify_toric_membership(partial, S.matrix, np.random.default_rng(1))


def test_checker_agrees_with_enumeration_on_genotypes():
    # a passing square-free check implies gap-free intervals; an order with a gap must fail it
    base = build_constraint_system(genotype_spec(3))
    for perm in [(0, 1, 2, 3, 4, 5), genotype_diagonal_first_order(3), (0, 1, 3, 4, 2, 5)]:
        S = reorder_cells(base, perm)
        verdict = check_prop_3_1(S).verdict
        gaps = not all(
            verify_sequential_interval(S, t).holds for t in [(0, 2, 2), (1, 2, 3), (2, 2, 2), (3, 1, 2)]
        )
        if verdict == PASS:
            assert not gaps
        if gaps:
            assert verdict == FAIL
    assert check_prop_3_1(reorder_cells(base, (0, 1, 3, 4, 2, 5))).witness["exponent"] == 2


def test_buchberger_budget():
    S = fixture("dsmall-3x3x3").system()
    gens = [Binomial.from_move(m) for m in markov_basis(S.matrix)]
    with pytest.raises(BudgetExceeded):
        buchberger(gens, TermOrder.lex(27), Limits(max_pairs=10))


def test_move_file_round_trip(tmp_path):
    moves = MoveSet(((1, -1, -1, 1), (2, 0, -1, -1)))
    path = tmp_path / "moves.txt"
    write_moves(path, moves)
    assert read_moves(path) == moves
    path.write_text("# header form\n2 4\n1 -1 -1 1\n2 0 -1 -1\n")
    assert read_moves(path) == moves
