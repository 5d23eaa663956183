import numpy as np

from gridclust.gridcore import CellIndex
from gridclust.ingest import build_annual_stack, load_dataset
from gridclust.synth import make_planted_stack

from conftest import brute_force_foci


class TestPlantedStack:
    def test_deterministic_for_a_seed(self):
        a, _ = make_planted_stack(nrows=12, ncols=12, n_years=4, b_exact=2, seed=3)
        b, _ = make_planted_stack(nrows=12, ncols=12, n_years=4, b_exact=2, seed=3)
        for fa, fb in zip(a.fields, b.fields):
            assert np.array_equal(fa.values, fb.values)

    def test_yearly_foci_are_exactly_the_planted_peaks(self):
        stack, truth = make_planted_stack(nrows=20, ncols=20, n_years=10, b_exact=5, seed=8)
        b_exact_seen = 0
        for i, field in enumerate(stack.fields):
            foci = brute_force_foci(field, "maxima")
            assert len(foci) == 2, f"year index {i}: {foci}"
            assert tuple(truth.peak_a) in foci
            b_cell = next(f for f in foci if f != tuple(truth.peak_a))
            if b_cell == tuple(truth.peak_b):
                b_exact_seen += 1
            else:
                assert CellIndex(*b_cell) in truth.jitter_cells
        assert b_exact_seen == 5
        assert set(truth.b_exact_year_indices) <= set(range(10))

    def test_zone_truth_matches_side_split(self):
        stack, truth = make_planted_stack(nrows=10, ncols=14, n_years=3, b_exact=1, seed=1)
        assert truth.zone_labels.shape == (10, 14)
        assert (truth.zone_labels[:, :7] == 0).all()
        assert (truth.zone_labels[:, 7:] == 1).all()

    def test_warm_side_is_warmer(self):
        stack, truth = make_planted_stack(nrows=10, ncols=10, n_years=2, b_exact=1, seed=2)
        for f in stack.fields:
            warm = f.values[truth.zone_labels == 0]
            cool = f.values[truth.zone_labels == 1]
            assert warm.min() > cool.max()


class TestWrittenDataset:
    def test_written_demo_round_trips(self, demo_dataset):
        root, truth = demo_dataset
        series = load_dataset(root)
        assert series.variable == "tmax"
        assert series.years == tuple(range(1990, 1996))
        stack = build_annual_stack(series)
        # masked corner propagates
        assert not stack.mask[0, 0]
        assert stack.mask[5, 5]
        # annual means reproduce the planted pattern: peaks recur
        for i, field in enumerate(stack.fields):
            foci = brute_force_foci(field, "maxima")
            assert tuple(truth.peak_a) in foci

    def test_seasonal_cycle_means_out(self, demo_dataset):
        root, truth = demo_dataset
        series = load_dataset(root)
        stack_disk = build_annual_stack(series)
        # compare against a fresh in-memory build with the same mask
        mask = np.ones((24, 24), dtype=bool)
        mask[:2, :2] = False
        stack_mem, _ = make_planted_stack(
            nrows=24, ncols=24, n_years=6, b_exact=3, seed=77, start_year=1990, mask=mask
        )
        for fd, fm in zip(stack_disk.fields, stack_mem.fields):
            assert np.allclose(
                fd.values[fd.mask], fm.values[fm.mask], atol=1e-9
            )

    def test_elevation_written(self, demo_dataset):
        root, _ = demo_dataset
        assert (root / "elevation.csv").exists()
