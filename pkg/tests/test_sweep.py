import pytest

from seamcam.engine import Proposal
from seamcam.errors import InsufficientData
from seamcam.masks import BinaryMask
from seamcam.pipeline import ProposalBundle, gen_synth_instance
from seamcam.sweep import (
    SweepGrid,
    SweepPairObs,
    load_sweep_dataset,
    save_sweep_dataset,
    staged_sweep,
    sweep_csv_row,
)


def full_mask(h=6, w=6):
    return BinaryMask(h, w, (0, h * w))


def bundle(image_id, proposals=(), h=6, w=6):
    return ProposalBundle(
        image_id=image_id,
        category="synthetic",
        height=h,
        width=w,
        detector_id="synthetic",
        proposals=tuple(proposals),
        gt_masks=(full_mask(h, w),),
    )


def planted_dataset(n=10):
    """bundle_a carries a perfect proposal (score 0), bundle_b carries
    nothing (score 1); humans always pick b as harder."""
    strong = Proposal((0, 0, 6, 6), alpha=0.9, beta=0.9, mask=full_mask())
    return [
        SweepPairObs(
            pair_id=f"pair{i}",
            species="frog",
            majority="b",
            bundle_a=bundle(f"a{i}", [strong]),
            bundle_b=bundle(f"b{i}"),
        )
        for i in range(n)
    ]


def default_grid(**kwargs):
    defaults = dict(
        tau_alpha_values=(0.50,),
        tau_beta_values=(0.10,),
        k_values=(1, 3),
        stage1_k=12,
    )
    defaults.update(kwargs)
    return SweepGrid(**defaults)


class TestStagedSweep:
    def test_planted_dataset_perfect_accuracy(self):
        grid = staged_sweep(planted_dataset(), default_grid())
        assert len(grid.stage1_cells) == 1
        cell = grid.stage1_cells[0]
        assert cell.accuracy == 1.0
        assert cell.evaluable == 10
        assert cell.k == 12
        assert (grid.best_tau_alpha, grid.best_tau_beta) == (0.50, 0.10)
        assert [c.k for c in grid.stage2_cells] == [1, 3]
        assert all(c.accuracy == 1.0 for c in grid.stage2_cells)

    def test_stage1_grid_covers_all_threshold_combinations(self):
        grid = staged_sweep(
            planted_dataset(4),
            default_grid(tau_alpha_values=(0.3, 0.5), tau_beta_values=(0.1, 0.2)),
        )
        combos = {(c.tau_alpha, c.tau_beta) for c in grid.stage1_cells}
        assert combos == {(0.3, 0.1), (0.3, 0.2), (0.5, 0.1), (0.5, 0.2)}

    def test_impossible_threshold_leaves_all_undecidable(self):
        # synthetic betas are uniform on [0, 1), so tau_beta=1.0 gates out
        # every proposal on both sides: all scores 1.0, all predictions
        # undecidable, and the cell records that instead of an accuracy
        pairs = []
        for i in range(6):
            a = gen_synth_instance(2 * i, height=8, width=8, n_prop=4)
            b = gen_synth_instance(2 * i + 1, height=8, width=8, n_prop=4)
            pairs.append(SweepPairObs(f"p{i}", "moth", "a", a.to_bundle(), b.to_bundle()))
        grid = staged_sweep(pairs, default_grid(tau_beta_values=(1.0,), k_values=(7,)))
        cell = grid.stage1_cells[0]
        assert cell.accuracy is None
        assert cell.undecidable == 6
        assert cell.evaluable == 0

    def test_latency_recorded(self):
        grid = staged_sweep(planted_dataset(3), default_grid())
        assert all(c.mean_latency_s > 0 for c in grid.cells())

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            staged_sweep([], default_grid())

    def test_best_cell_prefers_higher_accuracy(self):
        # anti-planted pair makes low tau_alpha wrong half the time only
        # when proposals survive; with the strong proposal gated out by
        # tau_alpha=0.95 both sides score 1.0 and the cell is undecidable
        grid = staged_sweep(
            planted_dataset(5),
            default_grid(tau_alpha_values=(0.95, 0.5), tau_beta_values=(0.1,)),
        )
        assert grid.best_tau_alpha == 0.5


class TestSweepIo:
    def test_dataset_round_trip(self, tmp_path):
        dataset = planted_dataset(4)
        path = tmp_path / "sweep.jsonl"
        save_sweep_dataset(dataset, path)
        assert load_sweep_dataset(path) == dataset

    def test_csv_row_shape(self):
        grid = staged_sweep(planted_dataset(2), default_grid())
        row = sweep_csv_row(grid.stage1_cells[0])
        assert row[0] == "1"
        assert len(row) == 8
