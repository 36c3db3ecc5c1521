import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paretohull.metrics import (
    FrontSample,
    HypervolumeSpec,
    dominates,
    evaluate_subspace,
    hypervolume,
    hypervolume_monte_carlo,
    load_front_csv,
    non_dominated_mask,
    oracle_front_toy,
    pareto_filter,
    save_front_csv,
    toy_reference_point,
)
from paretohull.objectives import TOY_INIT_POINTS, ToyConfig, ToyObjective, toy_loss
from paretohull.simplex import make_grid

from conftest import (
    QuadraticObjective,
    brute_force_front_mask,
    hypervolume_inclusion_exclusion,
)


def front(points):
    return [FrontSample(losses=np.asarray(p, dtype=np.float64)) for p in points]


class TestDominates:
    def test_weak_improvement_dominates(self):
        assert dominates([1.0, 2.0], [2.0, 2.0])

    def test_equal_points_do_not_dominate(self):
        assert not dominates([1.0, 2.0], [1.0, 2.0])

    def test_incomparable_points(self):
        assert not dominates([1.0, 3.0], [3.0, 1.0])
        assert not dominates([3.0, 1.0], [1.0, 3.0])

    def test_maximize_flips_orientation(self):
        assert dominates([2.0, 2.0], [1.0, 2.0], direction="maximize")

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            dominates([1.0], [1.0, 2.0])


class TestParetoFilter:
    def test_small_example(self):
        samples = front([(1.0, 2.0), (2.0, 1.0), (2.0, 2.0)])
        kept = pareto_filter(samples)
        assert [tuple(s.losses) for s in kept] == [(1.0, 2.0), (2.0, 1.0)]

    def test_empty_input(self):
        assert pareto_filter([]) == []

    def test_matches_brute_force_in_3d(self, rng):
        points = rng.uniform(0.0, 1.0, size=(200, 3))
        mask = non_dominated_mask(points)
        np.testing.assert_array_equal(mask, brute_force_front_mask(points))

    def test_matches_brute_force_in_2d_with_ties(self, rng):
        base = rng.integers(0, 4, size=(60, 2)).astype(np.float64)
        mask = non_dominated_mask(base)
        np.testing.assert_array_equal(mask, brute_force_front_mask(base))

    def test_duplicates_survive_together(self):
        samples = front([(1.0, 1.0), (1.0, 1.0), (2.0, 2.0)])
        kept = pareto_filter(samples)
        assert len(kept) == 2

    def test_idempotent(self, rng):
        samples = front(rng.uniform(0.0, 1.0, size=(100, 2)))
        once = pareto_filter(samples)
        twice = pareto_filter(once)
        assert [id(s) for s in once] == [id(s) for s in twice]

    def test_preserves_input_order(self, rng):
        samples = front(rng.uniform(0.0, 1.0, size=(50, 2)))
        kept = pareto_filter(samples)
        by_identity = {id(s): i for i, s in enumerate(samples)}
        positions = [by_identity[id(s)] for s in kept]
        assert positions == sorted(positions)

    def test_maximize_direction(self):
        samples = front([(1.0, 2.0), (2.0, 1.0), (2.0, 2.0)])
        kept = pareto_filter(samples, direction="maximize")
        assert [tuple(s.losses) for s in kept] == [(2.0, 2.0)]


class TestHypervolumeExact:
    def unit_spec(self):
        return HypervolumeSpec(reference=np.array([1.0, 1.0]))

    def test_single_origin_point_fills_box(self):
        assert hypervolume(front([(0.0, 0.0)]), self.unit_spec()) == 1.0

    def test_two_point_overlap_case(self):
        value = hypervolume(front([(0.2, 0.5), (0.5, 0.2)]), self.unit_spec())
        assert value == pytest.approx(0.55, abs=1e-12)

    def test_point_at_reference_contributes_nothing(self):
        assert hypervolume(front([(1.0, 1.0)]), self.unit_spec()) == 0.0

    def test_no_contributing_samples(self):
        assert hypervolume(front([(2.0, 0.5)]), self.unit_spec()) == 0.0
        assert hypervolume([], self.unit_spec()) == 0.0

    def test_maximize_orientation(self):
        spec = HypervolumeSpec(reference=np.zeros(2), direction="maximize")
        value = hypervolume(front([(0.8, 0.5)]), spec)
        assert value == pytest.approx(0.4, abs=1e-12)

    def test_monotone_under_new_samples(self, rng):
        spec = self.unit_spec()
        samples = front(rng.uniform(0.0, 1.0, size=(20, 2)))
        value = hypervolume(samples, spec)
        grown = hypervolume(samples + front([(0.05, 0.05)]), spec)
        assert grown >= value - 1e-12
        dominated = hypervolume(samples + front([(0.99, 0.99)]), spec)
        assert dominated == pytest.approx(value, abs=1e-12)

    def test_equals_filtered_value(self, rng):
        spec = self.unit_spec()
        samples = front(rng.uniform(0.0, 1.0, size=(50, 2)))
        assert hypervolume(samples, spec) == hypervolume(pareto_filter(samples), spec)

    def test_translation_covariance(self, rng):
        points = rng.uniform(0.0, 1.0, size=(30, 2))
        shift = np.array([3.5, -2.0])
        base = hypervolume(front(points), self.unit_spec())
        moved = hypervolume(
            front(points + shift), HypervolumeSpec(reference=np.array([1.0, 1.0]) + shift)
        )
        assert moved == pytest.approx(base, abs=1e-9)

    def test_3d_against_inclusion_exclusion(self, rng):
        ref = np.array([1.0, 1.0, 1.0])
        for _ in range(30):
            points = rng.uniform(0.0, 1.0, size=(rng.integers(1, 11), 3))
            spec = HypervolumeSpec(reference=ref)
            exact = hypervolume(front(points), spec)
            oracle = hypervolume_inclusion_exclusion(points, ref)
            assert exact == pytest.approx(oracle, abs=1e-12)

    def test_2d_against_inclusion_exclusion(self, rng):
        ref = np.array([1.0, 1.0])
        for _ in range(30):
            points = rng.uniform(0.0, 1.0, size=(rng.integers(1, 11), 2))
            exact = hypervolume(front(points), HypervolumeSpec(reference=ref))
            oracle = hypervolume_inclusion_exclusion(points, ref)
            assert exact == pytest.approx(oracle, abs=1e-12)

    def test_four_objectives_need_monte_carlo(self):
        with pytest.raises(ValueError):
            hypervolume(front([(0.1, 0.1, 0.1, 0.1)]), HypervolumeSpec(reference=np.ones(4)))

    @given(
        data=st.lists(
            st.tuples(
                st.floats(min_value=0.0, max_value=1.0),
                st.floats(min_value=0.0, max_value=1.0),
            ),
            min_size=1,
            max_size=12,
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_2d_matches_inclusion_exclusion_property(self, data):
        points = np.array(data)
        ref = np.array([1.0, 1.0])
        exact = hypervolume(front(points), HypervolumeSpec(reference=ref))
        oracle = hypervolume_inclusion_exclusion(points, ref)
        assert exact == pytest.approx(oracle, abs=1e-10)


class TestHypervolumeMonteCarlo:
    def test_agrees_with_exact_2d(self, rng):
        spec = HypervolumeSpec(reference=np.array([1.0, 1.0]))
        samples = front(rng.uniform(0.0, 1.0, size=(15, 2)))
        exact = hypervolume(samples, spec)
        estimate, stderr = hypervolume_monte_carlo(samples, spec, num_points=100_000, seed=4)
        assert abs(estimate - exact) <= 3.0 * stderr + 1e-12

    def test_deterministic_given_seed(self, rng):
        spec = HypervolumeSpec(reference=np.array([1.0, 1.0]))
        samples = front(rng.uniform(0.0, 1.0, size=(5, 2)))
        a = hypervolume_monte_carlo(samples, spec, num_points=10_000, seed=9)
        b = hypervolume_monte_carlo(samples, spec, num_points=10_000, seed=9)
        assert a == b

    def test_empty_contribution(self):
        spec = HypervolumeSpec(reference=np.array([1.0, 1.0]))
        assert hypervolume_monte_carlo(front([(2.0, 2.0)]), spec) == (0.0, 0.0)


class TestToyOracleFront:
    def test_front_is_self_consistent(self):
        samples = oracle_front_toy(grid_resolution=301)
        points = np.stack([s.losses for s in samples])
        assert non_dominated_mask(points).all()

    def test_reference_point_is_componentwise_max(self):
        ref = toy_reference_point()
        inits = np.stack([toy_loss(np.array(p)) for p in TOY_INIT_POINTS])
        np.testing.assert_allclose(ref, inits.max(axis=0), atol=1e-12)

    def test_grid_refinement_converges(self):
        spec = HypervolumeSpec(reference=toy_reference_point())
        coarse = hypervolume(oracle_front_toy(grid_resolution=1000), spec)
        fine = hypervolume(oracle_front_toy(grid_resolution=2000), spec)
        assert abs(coarse - fine) / fine < 0.01

    def test_scaled_config_front_is_scaled_copy(self):
        base = oracle_front_toy(grid_resolution=401)
        scaled = oracle_front_toy(ToyConfig(scale_c=0.1), grid_resolution=401)
        a = np.stack([s.losses for s in base])
        b = np.stack([s.losses for s in scaled])
        assert a.shape == b.shape
        a_sorted = a[np.lexsort((a[:, 1], a[:, 0]))]
        b_sorted = b[np.lexsort((b[:, 1], b[:, 0]))]
        np.testing.assert_allclose(b_sorted[:, 0], 0.1 * a_sorted[:, 0], atol=1e-12)
        np.testing.assert_allclose(b_sorted[:, 1], a_sorted[:, 1], atol=1e-12)

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            oracle_front_toy(grid_resolution=50)


class TestEvaluateSubspace:
    def test_two_point_grid_returns_member_losses(self):
        objective = ToyObjective()
        theta = np.array([[-8.5, 7.5], [9.0, -1.0]])
        samples = evaluate_subspace(theta, make_grid(2, 2), objective)
        np.testing.assert_allclose(samples[0].losses, objective.loss(theta[0]), atol=1e-12)
        np.testing.assert_allclose(samples[1].losses, objective.loss(theta[1]), atol=1e-12)

    def test_segment_count_and_endpoints(self):
        objective = ToyObjective()
        theta = np.array([[-8.5, 7.5], [9.0, -1.0]])
        samples = evaluate_subspace(theta, make_grid(2, 11), objective)
        assert len(samples) == 11
        np.testing.assert_allclose(samples[0].losses, objective.loss(theta[0]), atol=1e-12)
        np.testing.assert_allclose(samples[-1].losses, objective.loss(theta[1]), atol=1e-12)

    def test_three_member_grid_count(self):
        objective = QuadraticObjective([[1.0, 0.0], [0.0, 1.0]])
        theta = np.array([[0.0, 0.0], [1.0, 1.0], [0.5, -0.5]])
        samples = evaluate_subspace(theta, make_grid(3, 11), objective)
        assert len(samples) == 66

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            evaluate_subspace(np.zeros((2, 2)), make_grid(3, 5), ToyObjective())


class TestFrontCsv:
    def test_round_trip_with_weightings(self, tmp_path, rng):
        samples = [
            FrontSample(losses=rng.standard_normal(2), weighting=np.array([a, 1 - a]))
            for a in np.linspace(0.0, 1.0, 7)
        ]
        path = tmp_path / "front.csv"
        save_front_csv(path, samples)
        loaded = load_front_csv(path)
        for s, t in zip(samples, loaded):
            np.testing.assert_array_equal(s.losses, t.losses)
            np.testing.assert_array_equal(s.weighting, t.weighting)
        blob = path.read_bytes()
        save_front_csv(path, loaded)
        assert path.read_bytes() == blob

    def test_oracle_rows_have_blank_weightings(self, tmp_path):
        samples = front([(0.1, 0.2), (0.2, 0.1)])
        path = tmp_path / "front.csv"
        save_front_csv(path, samples, num_members=2)
        text = path.read_text()
        assert text.splitlines()[1].startswith(",,")
        loaded = load_front_csv(path)
        assert loaded[0].weighting is None
