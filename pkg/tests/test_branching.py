import math

import numpy as np
import pytest

from app import seeding
from app.branching import (
    MbpKernel,
    OffspringFamily,
    accepted_offspring,
    default_normalizer,
    dirac_offspring,
    extinction_iteration,
    extinction_profile,
    fearn_criterion,
    mbp_kernel_check,
    mbp_recurrence_probe,
    mbp_step,
    normalized_growth_probe,
    offspring_from_cardinality,
    offspring_from_pmf,
    simulate_bpve,
    simulate_bpve_batch,
    simulate_mbp,
)
from app.distmodel import DiscreteLaw
from app.exceptions import DegenerateMeanError, DistributionError, PopulationBudgetExceededError
from app.families import example45
from app.goals import always_nonzero, eventually_nonzero


@pytest.fixture
def binary():
    return offspring_from_pmf({0: 0.25, 2: 0.75}, name="binary")


def test_extinction_iteration_exact_values(binary):
    assert extinction_iteration(binary, 0, 1) == pytest.approx(0.25)
    assert extinction_iteration(binary, 0, 2) == pytest.approx(0.25 + 0.75 * 0.25 ** 2)
    assert extinction_iteration(binary, 0, 300) == pytest.approx(1 / 3, abs=1e-9)
    profile = extinction_profile(binary, 0, 10)
    assert profile == sorted(profile)
    with pytest.raises(DistributionError):
        extinction_iteration(binary, 0, 0)


def test_simulated_survival_matches_iteration(binary, seed, z):
    n, T = 4000, 6
    rows = simulate_bpve_batch(binary, 0, T, n, seed)
    assert rows.shape == (n, T + 1)
    assert np.all(rows[:, 0] == 1)
    p = 1 - extinction_iteration(binary, 0, T)
    observed = (rows[:, T] > 0).mean()
    assert abs(observed - p) <= z * math.sqrt(p * (1 - p) / n)


def test_batch_rows_are_index_streams(binary, seed):
    rows = simulate_bpve_batch(binary, 0, 4, 10, seed)
    assert np.array_equal(rows[3], simulate_bpve(binary, 0, 4, seeding.generator(seed, "bpve", 3)))
    shifted = simulate_bpve_batch(binary, 0, 4, 5, seed, start=5)
    assert np.array_equal(shifted, rows[5:])


def test_extinct_paths_stay_at_zero(seed):
    rows = simulate_bpve_batch(dirac_offspring(0), 0, 5, 3, seed)
    assert rows.tolist() == [[1, 0, 0, 0, 0, 0]] * 3


def test_population_budget(seed):
    with pytest.raises(PopulationBudgetExceededError):
        simulate_bpve(dirac_offspring(10), 0, 8, seeding.generator(seed, "x"), population_budget=1000)


def test_accepted_offspring_of_tiny_instance(tiny):
    off = accepted_offspring(tiny, always_nonzero())
    assert off.time_invariant
    assert off.at(3).pmf == pytest.approx({0: 0.5, 2: 0.5})


def test_accepted_offspring_of_example45_kills_the_zero_set():
    family = example45()
    accepted = accepted_offspring(family, eventually_nonzero()).at(0)
    total = offspring_from_cardinality(family).at(0)
    assert accepted.mass(0) == pytest.approx(total.mass(1))
    assert accepted.mass(2 ** 3) == pytest.approx(total.mass(2 ** 3 + 1))


def test_fearn_converges_for_supercritical_binary(binary):
    report = fearn_criterion(binary, 40)
    assert report.convergent
    assert report.means[0] == pytest.approx(1.5)
    assert report.variances[0] == pytest.approx(0.75)
    assert report.summands[1] == pytest.approx(report.summands[0] / 1.5)
    assert report.partial_sums[-1] == pytest.approx(sum(report.summands))
    assert report.to_dict()["label"] == "heuristic"


def test_fearn_product_starts_at_stage_zero_mean():
    laws = {0: DiscreteLaw.from_pmf({1: 0.5, 3: 0.5})}
    off = OffspringFamily("two-phase", lambda t: laws.get(t, DiscreteLaw.from_pmf({2: 0.5, 4: 0.5})))
    report = fearn_criterion(off, 3)
    assert report.summands == pytest.approx([1.0 / 4.0, 1.0 / 18.0, 1.0 / 54.0])


def test_fearn_diverges_for_critical_law():
    report = fearn_criterion(offspring_from_pmf({0: 0.5, 2: 0.5}), 40)
    assert not report.convergent


def test_fearn_rejects_zero_mean():
    with pytest.raises(DegenerateMeanError):
        fearn_criterion(dirac_offspring(0), 5)


def test_mbp_kernel_cdf_is_power():
    kernel = MbpKernel(DiscreteLaw.from_pmf({1: 0.5, 2: 0.5}))
    assert kernel.step_cdf(1, 3) == pytest.approx(0.125)
    assert kernel.step_cdf(2, 3) == pytest.approx(1.0)


def test_mbp_step_matches_kernel(seed):
    kernel = MbpKernel(DiscreteLaw.from_pmf({1: 0.5, 2: 0.25, 5: 0.25}))
    for y in (1, 2, 5, 20):
        assert mbp_kernel_check(kernel, y, 20_000, seed, alpha=1e-4)["passed"]
    draws = mbp_step(kernel, 5000, seeding.generator(seed, "big"), 100)
    assert set(draws.tolist()) == {5}


def test_mbp_paths_and_probe(seed):
    kernel = MbpKernel(DiscreteLaw.from_pmf({1: 0.5, 2: 0.5}))
    path = simulate_mbp(kernel, 10, seeding.generator(seed, "mbp"))
    assert path[0] == 1 and set(path[1:].tolist()) <= {1, 2}
    probe = mbp_recurrence_probe(kernel, 40, 20, seed)
    assert probe["label"] == "probe"
    assert 0.0 <= probe["bounded_frequency"] <= 1.0


def test_growth_probe_on_binary_process(binary, seed):
    r = default_normalizer(binary, 0, 6)
    assert r[-1] == pytest.approx(1.5 ** 6)
    probe = normalized_growth_probe(binary, 6, 300, seed)
    assert probe["survivors"] > 0
    assert probe["label"] == "probe"
    undefined = normalized_growth_probe(dirac_offspring(0), 3, 10, seed)
    assert undefined["stabilizing"] is None
