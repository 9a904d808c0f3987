import math

import numpy as np
import pytest

from app.actionset import ActionSet
from app.distmodel import (
    EXP_NEG_EULER_GAMMA,
    CardinalityLaw,
    DiscreteLaw,
    DistributionFamily,
    PrimitiveDistribution,
    cardinality_law,
    compose_cardinality,
    dkw_epsilon,
    dominates,
    dominating_envelope,
    ks_pvalue,
    lamperti_check,
    law_moments,
    log_product,
    pgf_derivative,
    pgf_eval,
    z_for_confidence,
)
from app.exceptions import DistributionError, DomainError
from app.families import bernoulli_two_sets, example45, example45_q


def test_law_rejects_bad_normalisation():
    with pytest.raises(DistributionError):
        DiscreteLaw((0, 1), (0.5, 0.4))
    with pytest.raises(DistributionError):
        CardinalityLaw((0, 1), (0.5, 0.5))


def test_primitive_distribution_rejects_duplicate_sets():
    a = ActionSet.singleton(0)
    with pytest.raises(DistributionError):
        PrimitiveDistribution((a, a), (0.5, 0.5))


def test_from_rows_merges_duplicates():
    a, b = ActionSet.singleton(0), ActionSet.of([1, 2])
    dist = PrimitiveDistribution.from_rows([(a, 0.25), (b, 0.5), (a, 0.25)])
    assert dist.mass_of(a) == pytest.approx(0.5)
    assert dist.log_mass(ActionSet.singleton(9)) == -math.inf


def test_cardinality_law_groups_by_size():
    dist = PrimitiveDistribution.from_rows([
        (ActionSet.of([1, 2]), 0.3), (ActionSet.of([0, 5]), 0.2), (ActionSet.singleton(0), 0.5),
    ])
    assert cardinality_law(dist).pmf == pytest.approx({1: 0.5, 2: 0.5})


def test_pgf_domain_and_values():
    q = DiscreteLaw.from_pmf({0: 0.25, 2: 0.75})
    assert pgf_eval(q, 0.0) == pytest.approx(0.25)
    assert pgf_eval(q, 0.5) == pytest.approx(0.25 + 0.75 * 0.25)
    assert pgf_eval(q, 1.0) == pytest.approx(1.0)
    assert pgf_derivative(q, 1.0) == pytest.approx(1.5)
    with pytest.raises(DomainError):
        pgf_eval(q, 1.5)


def test_composition_matches_pgf_composition():
    family = bernoulli_two_sets(ActionSet.of([1, 2, 3]), ActionSet.singleton(0), 0.4)
    composed = compose_cardinality(family, 0, 2)
    g0, g1 = cardinality_law(family.at(0)), cardinality_law(family.at(1))
    for x in (0.1, 0.5, 0.9):
        assert pgf_eval(composed, x) == pytest.approx(pgf_eval(g0, pgf_eval(g1, x)), rel=1e-9)


def test_composition_with_zero_stages_is_dirac_one():
    assert compose_cardinality(example45(), 3, 0).pmf == {1: 1.0}


def test_composition_exact_two_stage_law():
    family = bernoulli_two_sets(ActionSet.of([0]), ActionSet.of([0, 1]), 0.5)
    composed = compose_cardinality(family, 0, 2)
    assert composed.pmf == pytest.approx({1: 0.25, 2: 0.375, 3: 0.25, 4: 0.125}, abs=1e-12)
    assert composed.tail_mass_bound == pytest.approx(0.0, abs=1e-15)


def test_composition_cap_moves_mass_to_tail():
    family = bernoulli_two_sets(ActionSet.of([0]), ActionSet.interval(0, 10), 0.5)
    composed = compose_cardinality(family, 0, 2, n_max=5)
    assert composed.pmf == pytest.approx({1: 0.25})
    assert composed.tail_mass_bound == pytest.approx(0.75)


def test_composition_with_large_atoms():
    family = example45()
    composed = compose_cardinality(family, 0, 2)
    g0, g1 = cardinality_law(family.at(0)), cardinality_law(family.at(1))
    for x in (0.5, 0.9):
        assert pgf_eval(composed, x) == pytest.approx(pgf_eval(g0, pgf_eval(g1, x)), rel=1e-9)


def test_dominance_and_envelope():
    small = DiscreteLaw.from_pmf({1: 0.5, 2: 0.5})
    large = DiscreteLaw.from_pmf({1: 0.25, 3: 0.75})
    assert dominates(large, small)
    assert not dominates(small, large)
    envelope = dominating_envelope([small, large])
    assert dominates(envelope, small) and dominates(envelope, large)


def test_example45_law_is_dominated_by_its_closed_form():
    q = example45_q()
    family = example45()
    for t in range(8):
        assert dominates(q, cardinality_law(family.at(t)))


def test_lamperti_range_on_closed_form_law():
    verdict = lamperti_check(example45_q(), 2 ** 20)
    assert 0.49 <= verdict.sup_estimate <= 0.51
    assert verdict.verdict
    assert verdict.threshold == pytest.approx(0.5614594835668851, abs=1e-12)
    assert EXP_NEG_EULER_GAMMA == pytest.approx(0.5614594835668851, abs=1e-12)


def test_lamperti_range_rejects_heavy_tail():
    # P(N > n) = 1/n: n (1 - F(n)) sits at 1.
    pmf = {n: 1.0 / (n - 1) - 1.0 / n for n in range(2, 4096)}
    q = DiscreteLaw.from_pmf(pmf, tail_mass_bound=1.0 / 4095)
    assert not lamperti_check(q, 2048).verdict


def test_law_moments_for_finite_law():
    moments = law_moments(DiscreteLaw.from_pmf({1: 0.5, 3: 0.5}))
    assert moments.mean == pytest.approx(2.0)
    assert moments.variance == pytest.approx(1.0)
    assert moments.mean_finite and moments.variance_finite


def test_law_moments_flag_infinite_mean_tail():
    pmf = {2 ** k: 2.0 ** -k for k in range(1, 40)}
    q = DiscreteLaw.from_pmf(pmf, tail_mass_bound=2.0 ** -39)
    assert not law_moments(q).mean_finite


def test_log_product_matches_direct_product():
    factors = [1 - 2.0 ** -(k + 1) for k in range(30)]
    assert math.exp(log_product(factors)) == pytest.approx(math.prod(factors), rel=1e-12)
    assert log_product([0.5, 0.0]) == -math.inf


def test_dkw_band_and_ks_pvalue():
    assert dkw_epsilon(100_000, 0.01) == pytest.approx(math.sqrt(math.log(200) / 200_000))
    with pytest.raises(DistributionError):
        dkw_epsilon(0, 0.01)
    assert ks_pvalue(0.0, 100) == pytest.approx(1.0)
    assert ks_pvalue(0.5, 100) < 1e-6


def test_z_for_confidence():
    assert z_for_confidence(0.95) == pytest.approx(1.959964, abs=1e-5)
    with pytest.raises(DistributionError):
        z_for_confidence(1.0)


def test_family_memoises_and_advances():
    calls = []

    def generator(t):
        calls.append(t)
        return PrimitiveDistribution.dirac(ActionSet.interval(0, t))

    family = DistributionFamily("grow", generator)
    assert len(family.at(3).sets[0]) == 4
    family.at(3)
    assert calls == [3]
    assert family.advanced(2).at(1) is family.at(3)
    with pytest.raises(DistributionError):
        family.at(-1)


def test_sampling_uses_listed_masses():
    q = DiscreteLaw.from_pmf({1: 0.25, 5: 0.75})
    draws = q.sample(np.random.default_rng(0), 20_000)
    assert set(np.unique(draws).tolist()) == {1, 5}
    assert abs((draws == 5).mean() - 0.75) < 0.02
