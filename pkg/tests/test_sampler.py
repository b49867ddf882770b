import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sistables.bounds import enumerate_fiber
from sistables.model import ConstraintSystem, build_constraint_system, compute_margin, genotype_spec
from sistables.sampler import (
    ProposalKind,
    SampledTable,
    SISRun,
    TargetDistribution,
    cv_squared,
    effective_sample_size,
    estimate_count,
    estimate_mu,
    exact_mu,
    exact_test_statistic,
    replay_log_q,
    run_sis,
    sis_sample_one,
    step_draw,
    step_log_prob,
    step_pmf_hypergeometric,
    step_pmf_uniform,
    target_log_weight,
)

from conftest import independence_system

HYPER = TargetDistribution.parse("hyper")
UNIFORM = TargetDistribution.parse("uniform")


def _run_from_weights(weights):
    """A run whose samples carry importance weights ``weights`` under the uniform target (0 = invalid)."""
    samples = []
    for w in weights:
        if w:
            samples.append(SampledTable(None, -math.log(w), True))
        else:
            samples.append(SampledTable(None, 0.0, False))
    return SISRun(samples, None)


def test_uniform_pmf_examples():
    assert step_pmf_uniform(5, 5) == {5: 1}
    assert step_pmf_uniform(0, 3) == {x: Fraction(1, 4) for x in range(4)}
    assert step_pmf_uniform(-2, 2) == {x: Fraction(1, 5) for x in range(-2, 3)}
    with pytest.raises(ValueError):
        step_pmf_uniform(3, 2)


def test_hypergeometric_pmf_examples():
    assert step_pmf_hypergeometric(4, 4) == {4: 1}
    assert step_pmf_hypergeometric(0, 1) == {0: Fraction(1, 2), 1: Fraction(1, 2)}
    assert step_pmf_hypergeometric(0, 2) == {0: Fraction(1, 6), 1: Fraction(4, 6), 2: Fraction(1, 6)}
    with pytest.raises(ValueError):
        step_pmf_hypergeometric(-1, 2)


def test_pmfs_sum_to_one_exactly():
    for u in range(31):
        for l in range(u + 1):
            assert sum(step_pmf_uniform(l, u).values()) == 1
            assert sum(step_pmf_hypergeometric(l, u).values()) == 1


@settings(max_examples=50)
@given(st.integers(0, 30), st.integers(0, 30), st.data())
def test_log_prob_matches_pmf(a, b, data):
    l, u = min(a, b), max(a, b)
    x = data.draw(st.integers(l, u))
    for kind, pmf in ((ProposalKind.UNIFORM, step_pmf_uniform), (ProposalKind.HYPERGEOMETRIC, step_pmf_hypergeometric)):
        assert math.isclose(step_log_prob(kind, l, u, x), math.log(pmf(l, u)[x]), abs_tol=1e-9)


def test_hypergeometric_draws_follow_pmf():
    rng = np.random.default_rng(11)
    l, u, n = 1, 4, 40_000
    draws = np.array([step_draw(ProposalKind.HYPERGEOMETRIC, l, u, rng) for _ in range(n)])
    for x, p in step_pmf_hypergeometric(l, u).items():
        freq = np.mean(draws == x)
        assert abs(freq - float(p)) < 4 * math.sqrt(float(p) * (1 - float(p)) / n)


def test_proposal_parse():
    assert ProposalKind.parse("hyper") is ProposalKind.HYPERGEOMETRIC
    with pytest.raises(ValueError):
        ProposalKind.parse("poisson")
    with pytest.raises(ValueError):
        TargetDistribution.parse("hw")


def test_unique_fiber():
    S = ConstraintSystem(np.eye(3, dtype=int), ("a", "b", "c"))
    run = run_sis(S, (2, 0, 5), 20)
    assert all(s.valid and s.log_q == 0.0 and s.table.counts == (2, 0, 5) for s in run.samples)
    rep = estimate_count(run)
    assert rep.value == 1.0 and rep.good_fraction == 1.0


def test_case_control_lp_samples_all_valid(breslow):
    run = run_sis(breslow.system(), breslow.margin(), 200, "uniform", "lp", seed=1)
    assert run.good_fraction == 1.0


def test_shuttle_samples_mostly_valid(czech):
    run = run_sis(czech.system(), czech.margin(), 200, "hyper", "shuttle", seed=2)
    assert run.good_fraction >= 0.95


def test_case_control_count(breslow):
    rep = estimate_count(run_sis(breslow.system(), breslow.margin(), 1000, "uniform", "lp", seed=0))
    assert abs(rep.value - 25) <= 3 * rep.standard_error
    assert 0.05 <= rep.cv_squared <= 1


def test_replay_matches_sampled_density(breslow):
    S, t = breslow.system(), breslow.margin()
    run = run_sis(S, t, 50, "hyper", "lp", seed=3)
    for s in run.samples:
        assert replay_log_q(S, t, s.table, "hyper", "lp") == s.log_q
    assert replay_log_q(S, t, (0,) * S.num_cells, "hyper", "lp") is None


def test_dead_end_is_reported():
    # 2 x1 + 2 x2 = 1 has rational solutions but no integer one
    S = ConstraintSystem(np.array([[2, 2]]), ("1", "2"))
    rng = np.random.default_rng(0)
    draws = [sis_sample_one(S, (1,), "uniform", "lp", rng) for _ in range(5)]
    assert all(not d.valid and d.table is None and d.dead_end_at == 1 for d in draws)
    run = SISRun(draws, None)
    assert estimate_count(run).all_invalid
    with pytest.raises(ZeroDivisionError):
        estimate_mu(run, UNIFORM, statistic=lambda n: 1)


def test_runs_do_not_depend_on_jobs(breslow):
    S, t = breslow.system(), breslow.margin()
    a = run_sis(S, t, 40, "hyper", "lp", seed=5, jobs=1)
    b = run_sis(S, t, 40, "hyper", "lp", seed=5, jobs=3)
    assert [s.table for s in a.samples] == [s.table for s in b.samples]
    assert a.log_q().tolist() == b.log_q().tolist()
    c = run_sis(S, t, 40, "hyper", "lp", seed=6)
    assert [s.table for s in a.samples] != [s.table for s in c.samples]


def test_ratio_of_constant_is_one(breslow):
    run = run_sis(breslow.system(), breslow.margin(), 100, "uniform", "lp", seed=0)
    assert estimate_mu(run, HYPER, statistic=lambda n: 1).value == pytest.approx(1.0, abs=1e-12)


def test_equal_weights():
    run = _run_from_weights([2.5] * 1000)
    assert cv_squared(run) == pytest.approx(0.0, abs=1e-15)
    assert effective_sample_size(run) == pytest.approx(1000)


def test_cv2_hand_example():
    run = _run_from_weights([1, 3])
    assert cv_squared(run) == pytest.approx(0.25)
    assert effective_sample_size(run) == pytest.approx(1.6)


def test_invalid_samples_count_as_zero_weight():
    run = _run_from_weights([2, 0] * 500)
    assert cv_squared(run) == pytest.approx(1.0)
    assert effective_sample_size(run) == pytest.approx(500)
    with pytest.raises(ValueError):
        cv_squared(_run_from_weights([1, 0, 0]))


def test_target_log_weights():
    assert target_log_weight(UNIFORM, (4, 1, 0)) == 0.0
    diff = target_log_weight(HYPER, (1, 1)) - target_log_weight(HYPER, (2, 0))
    assert diff == pytest.approx(math.log(2))
    S = build_constraint_system(genotype_spec(3))
    hw = TargetDistribution.hardy_weinberg(S)
    homo = (3, 0, 2, 0, 0, 1)
    assert target_log_weight(hw, homo) == target_log_weight(HYPER, homo)
    mixed = (0, 2, 0, 1, 0, 0)
    assert target_log_weight(hw, mixed) - target_log_weight(HYPER, mixed) == pytest.approx(3 * math.log(2))


def test_exact_statistic():
    f = exact_test_statistic(HYPER, (2, 0, 1))
    assert f((2, 0, 1)) == 1
    assert f((1, 1, 1)) == 0  # 1/1 > 1/2
    assert f((1, 0, 2)) == 1  # a permuted table ties exactly
    g = exact_test_statistic(UNIFORM, (2, 0, 1))
    assert all(g(n) == 1 for n in [(0, 3, 0), (1, 1, 1)])


def test_exact_pvalue_by_enumeration(breslow):
    S, t = breslow.system(), breslow.margin()
    tables = enumerate_fiber(S, t)
    p = exact_mu(tables, HYPER, observed=breslow.table())
    w0 = HYPER.exact_weight(breslow.table())
    weights = [HYPER.exact_weight(tb.counts) for tb in tables]
    assert p == sum(w for w in weights if w <= w0) / sum(weights)
    assert 0 < p < 1 and isinstance(p, Fraction)


def test_case_control_pvalue_against_enumeration(breslow):
    S, t = breslow.system(), breslow.margin()
    exact = exact_mu(enumerate_fiber(S, t), HYPER, observed=breslow.table())
    rep = estimate_mu(run_sis(S, t, 1000, "hyper", "lp", seed=4), HYPER, observed=breslow.table())
    assert abs(rep.value - float(exact)) <= 3 * rep.standard_error


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=6, max_size=6), st.integers(0, 2**16))
def test_valid_samples_satisfy_margins(n, seed):
    S = independence_system(2, 3)
    t = compute_margin(S, n)
    run = run_sis(S, t, 10, "hyper", "lp", seed=seed)
    for s in run.samples:
        assert s.valid and compute_margin(S, s.table) == t


@pytest.mark.slow
def test_large_table_weights_are_uneven(dsmall):
    run = run_sis(dsmall.system(), dsmall.margin(), 1000, "hyper", "lp", seed=0, jobs=4)
    assert cv_squared(run, HYPER) > 10
