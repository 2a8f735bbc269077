import json
from fractions import Fraction

import pytest

from evaluation.exact import (
    ExpSum,
    as_decimal,
    exact_cost,
    exact_policy_cost,
    exact_randomized_cost,
    opt_dp,
    prophet_value,
    rand_stop_segments,
)
from evaluation.monte_carlo import monte_carlo_cost
from evaluation.report import (
    BOUNDS,
    competitive_ratio,
    competitive_report,
    e_over_e_minus_one,
    write_csv,
    write_jsonl,
)
from generators.stopping import (
    benchmark_gap_instance,
    exp_trap_instance,
    harmonic_instance,
    random_supermartingale,
    ski_rental_instance,
    ski_rental_mixture,
)
from model.tree import TreeBuilder, perturb_leaves
from tests.helpers import chain, one_step, suite_size, with_random_costs

HALF = Fraction(1, 2)


def harmonic_number(n):
    return sum(Fraction(1, i) for i in range(1, n + 1))


class TestOptDp:
    def test_single_node(self):
        assert opt_dp(chain([Fraction(7, 2)])).value == Fraction(7, 2)

    def test_stopping_beats_continuing(self):
        assert opt_dp(one_step(1, [(0, HALF), (3, HALF)])).value == 1

    def test_continuing_beats_stopping(self):
        result = opt_dp(one_step(3, [(0, HALF), (3, HALF)]))
        assert result.value == Fraction(5, 2)
        assert result.stopping_nodes == frozenset({1, 2})

    def test_ties_break_toward_stopping(self):
        result = opt_dp(one_step(2, [(0, HALF), (2, HALF)]))
        assert result.value == 2
        assert result.stopping_nodes == frozenset({0})

    def test_step_costs_are_charged(self):
        builder = TreeBuilder()
        root = builder.add(10, cost=4)
        builder.add(0, parent=root, prob=1)
        assert opt_dp(builder.build()).value == 4


class TestProphetValue:
    def test_single_node(self):
        assert prophet_value(chain([6])) == 6

    def test_chain_takes_pointwise_minimum(self):
        assert prophet_value(chain([5, 0])) == 1

    def test_never_above_opt(self):
        for seed in range(20):
            tree = random_supermartingale(3, 3, 20, seed)
            assert prophet_value(tree) <= opt_dp(tree).value

    def test_benchmark_gap_is_constant(self):
        tree = benchmark_gap_instance(5, 10)
        assert opt_dp(tree).value == 5
        assert prophet_value(tree) < 2

    def test_benchmark_gap_ratio_grows_with_n(self):
        ratios = []
        for n in (2, 4, 8):
            tree = benchmark_gap_instance(n, n)
            ratios.append(opt_dp(tree).value / prophet_value(tree))
        assert ratios[0] < ratios[1] < ratios[2]
        assert ratios[2] > 6


class TestExactPolicyCost:
    @pytest.mark.parametrize("policy", ["det", "ski", "ski-min"])
    def test_single_node(self, policy):
        assert exact_policy_cost(chain([9]), policy).cost == 9

    def test_harmonic_ski_stop_index_is_harmonic_number(self):
        result = exact_policy_cost(harmonic_instance(3), "ski")
        assert result.stop_index == Fraction(11, 6)
        assert result.cost == Fraction(17, 6)

    @pytest.mark.parametrize("n", [1, 2, 5, 8])
    def test_harmonic_ski_closed_form(self, n):
        result = exact_policy_cost(harmonic_instance(n), "ski")
        assert result.stop_index == harmonic_number(n)
        assert result.cost == harmonic_number(n) + 1

    def test_harmonic_opt_is_one(self):
        assert opt_dp(harmonic_instance(3)).value <= 1

    def test_randomized_policy_is_refused(self):
        with pytest.raises(ValueError):
            exact_policy_cost(chain([1]), "rand")


class TestExactRandomizedCost:
    def test_coin_single_node(self):
        assert exact_randomized_cost(chain([4]), "coin").cost == 4

    def test_coin_two_outcomes(self):
        assert exact_randomized_cost(chain([4, 0]), "coin").cost == Fraction(7, 4)

    def test_rand_constant_unit_chain(self):
        result = exact_randomized_cost(chain([1, 1]), "rand")
        assert float(as_decimal(result.cost)) == pytest.approx(1, abs=1e-15)

    def test_rand_single_node(self):
        result = exact_randomized_cost(chain([5]), "rand")
        assert float(as_decimal(result.cost)) == pytest.approx(5, abs=1e-15)

    def test_rand_segments_cover_unit_interval(self):
        segments = rand_stop_segments((Fraction(2), Fraction(4), Fraction(4)))
        assert segments == [(0, 0, HALF), (1, HALF, Fraction(3, 4)), (2, Fraction(3, 4), 1)]

    def test_rand_zero_value_absorbs_remaining_thresholds(self):
        assert rand_stop_segments((Fraction(4), Fraction(0), Fraction(0))) == [
            (0, 0, Fraction(1, 4)), (1, Fraction(1, 4), 1)]

    def test_rand_closed_form_matches_hand_integral(self):
        # path (2, 4, 4): costs 2, 5, 6 on (0,1/2], (1/2,3/4], (3/4,1]
        result = exact_randomized_cost(chain([2, 4, 4]), "rand")
        expected = (
            ExpSum().add_term(2, HALF).add_term(-2, 0)
            + ExpSum().add_term(5, Fraction(3, 4)).add_term(-5, HALF)
            + ExpSum().add_term(6, 1).add_term(-6, Fraction(3, 4))
        )
        assert result.cost.numerator == expected

    def test_exp_sum_evaluates(self):
        one = ExpSum({1: 1, 0: -1})
        assert float(one.evaluate()) == pytest.approx(1.718281828459045)


class TestMonteCarlo:
    def test_deterministic_policy_agrees_with_exact(self):
        tree = harmonic_instance(4)
        estimate = monte_carlo_cost(tree, "det", 3000, seed=3)
        assert estimate.agrees_with(as_decimal(exact_cost(tree, "det").cost), sigmas=5)

    def test_randomized_policy_agrees_with_exact(self):
        tree = random_supermartingale(3, 3, 30, seed=8)
        estimate = monte_carlo_cost(tree, "rand", 4000, seed=1)
        assert estimate.agrees_with(as_decimal(exact_cost(tree, "rand").cost), sigmas=5)

    def test_coin_agrees_with_exact(self):
        tree = chain([4, 0])
        estimate = monte_carlo_cost(tree, "coin", 4000, seed=2)
        assert estimate.mean == pytest.approx(1.75, abs=5 * estimate.stderr)

    def test_fixed_seed_is_reproducible(self):
        tree = harmonic_instance(5)
        assert monte_carlo_cost(tree, "rand", 200, 9) == monte_carlo_cost(tree, "rand", 200, 9)

    def test_single_trial_is_degenerate(self):
        estimate = monte_carlo_cost(harmonic_instance(2), "det", 1, 0)
        assert estimate.stderr == 0
        assert estimate.degenerate

    def test_zero_trials_is_rejected(self):
        with pytest.raises(ValueError):
            monte_carlo_cost(chain([1]), "det", 0, 0)


class TestCompetitiveReport:
    def test_single_node_ratios_are_one(self):
        reports = competitive_report(chain([5]), ["det", "rand", "coin", "ski", "ski-min"])
        for report in reports:
            assert report.ratio == pytest.approx(1)
            assert not report.bound_violated

    def test_zero_opt(self):
        assert competitive_ratio(Fraction(0), Fraction(0)) == 1.0
        assert competitive_ratio(Fraction(1), Fraction(0)) == float("inf")

    def test_harmonic_ski_ratio_exceeds_harmonic_number(self):
        (report,) = competitive_report(harmonic_instance(10), ["ski"])
        assert report.ratio >= float(harmonic_number(10))
        assert report.bound is None

    def test_record_is_json_ready(self, tmp_path):
        reports = competitive_report(harmonic_instance(3), ["det", "rand"], instance_id="h3", trials=50)
        records = [r.to_record() for r in reports]
        write_jsonl(records, tmp_path / "r.jsonl", config={"label": "t"})
        write_csv(records, tmp_path / "r.csv")

        lines = (tmp_path / "r.jsonl").read_text(encoding="utf-8").splitlines()
        assert json.loads(lines[0])["type"] == "header"
        assert json.loads(lines[0])["config"] == {"label": "t"}
        assert [json.loads(line)["policy"] for line in lines[1:]] == ["det", "rand"]
        assert records[0]["opt"] == "1/1"
        assert "(e - 1)" in records[1]["exact_cost_exact"]
        assert (tmp_path / "r.csv").read_text(encoding="utf-8").startswith("instance_id,policy")

    def test_bounds(self):
        assert BOUNDS["det"] == 2
        assert float(BOUNDS["rand"]) == pytest.approx(1.5819767068693265)
        assert e_over_e_minus_one() == BOUNDS["rand"]


@pytest.mark.parametrize("policy", ["det", "rand", "coin"])
def test_fuzzed_trees_stay_within_bound(policy):
    for seed in range(suite_size(500, 2000)):
        depth = 1 + seed % 6
        tree = random_supermartingale(depth, 3 if depth <= 4 else 2, 50, seed)
        (report,) = competitive_report(tree, [policy], instance_id=f"seed{seed}")
        assert not report.bound_violated, f"seed {seed}: ratio {report.ratio}"


def test_fuzzed_nonincreasing_trees_stay_within_bound():
    for seed in range(suite_size(20, 100)):
        tree = random_supermartingale(4, 3, 50, seed, nonincreasing=True)
        for report in competitive_report(tree, ["det", "rand", "coin"]):
            assert not report.bound_violated, f"seed {seed}: {report.policy} {report.ratio}"


def test_robustness_on_perturbed_trees():
    for seed in range(suite_size(20, 100)):
        tree = random_supermartingale(3, 3, 50, seed)
        perturbed = perturb_leaves(tree, 2, "max")
        reports = competitive_report(
            perturbed, ["det", "rand"], alpha=2, reference_opt=opt_dp(tree).value)
        for report in reports:
            assert not report.bound_violated, f"seed {seed}: {report.policy} {report.ratio}"


FAMILIES = (
    [(f"harmonic{n}", harmonic_instance(n)) for n in range(1, 9)]
    + [(f"exp_trap{n}", exp_trap_instance(n)) for n in (2, 4, 6)]
    + [(f"gap{n}", benchmark_gap_instance(n, n + 2)) for n in (2, 4, 8)]
    + [(f"ski{b}_{t}", ski_rental_instance(b, t, 8)) for b in (1, 3, 7) for t in (0, 2, 5, 8)]
    + [("ski_mixture", ski_rental_mixture(4, {1: 1, 3: 2, 6: 1}, 6))]
)


@pytest.mark.parametrize("name,tree", FAMILIES, ids=[name for name, _ in FAMILIES])
def test_instance_families_stay_within_bound(name, tree):
    for report in competitive_report(tree, ["det", "rand", "coin"], instance_id=name):
        assert not report.bound_violated, f"{name}: {report.policy} {report.ratio}"


def test_costed_trees_stay_within_bound():
    for seed in range(suite_size(100, 500)):
        tree = with_random_costs(random_supermartingale(1 + seed % 4, 3, 50, seed), seed)
        for report in competitive_report(tree, ["det", "rand", "coin"]):
            assert not report.bound_violated, f"seed {seed}: {report.policy} {report.ratio}"


MONTE_CARLO_TRIALS = suite_size(2000, 10**5)


@pytest.mark.parametrize("policy", ["det", "rand", "coin"])
def test_monte_carlo_agrees_with_exact_on_random_trees(policy):
    for seed in range(20):
        tree = random_supermartingale(1 + seed % 4, 3, 30, seed)
        estimate = monte_carlo_cost(tree, policy, MONTE_CARLO_TRIALS, seed=seed)
        exact = as_decimal(exact_cost(tree, policy).cost)
        assert estimate.degenerate or estimate.agrees_with(exact, sigmas=5), f"seed {seed}"


@pytest.mark.parametrize("policy", ["det", "rand", "coin"])
def test_monte_carlo_agrees_with_exact_on_costed_trees(policy):
    for seed in range(suite_size(10, 50)):
        tree = with_random_costs(random_supermartingale(1 + seed % 3, 3, 30, seed), seed)
        estimate = monte_carlo_cost(tree, policy, suite_size(1000, 10**4), seed=seed)
        exact = as_decimal(exact_cost(tree, policy).cost)
        assert estimate.degenerate or estimate.agrees_with(exact, sigmas=5), f"seed {seed}"
