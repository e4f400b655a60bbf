import pytest

from seamcam.engine import ScoreResult, seamcam_score
from seamcam.errors import EmptyCandidates, ParseError, VersionError
from seamcam.pipeline import (
    Candidate,
    CandidateSet,
    batch_score,
    bundle_from_dict,
    gen_synth_instance,
    iter_bundle_stream,
    load_bundle,
    save_bundle,
    save_bundle_stream,
    select_hard_negative,
)


def synth_bundles(n, seed0=0, **kwargs):
    return [gen_synth_instance(seed0 + i, **kwargs).to_bundle() for i in range(n)]


def result(score):
    return ScoreResult(
        detectability=1.0 - score,
        score=score,
        best_subset=(0,),
        kept_count=1,
        subsets_evaluated=1,
    )


class TestBundleIo:
    def test_round_trip_200_seeded_bundles(self, tmp_path):
        for i, bundle in enumerate(synth_bundles(200, n_prop=3, height=8, width=8)):
            path = tmp_path / f"b{i}.json"
            save_bundle(bundle, path)
            assert load_bundle(path) == bundle

    def test_stream_round_trip(self, tmp_path):
        bundles = synth_bundles(20, n_prop=2, height=6, width=6)
        path = tmp_path / "stream.jsonl"
        assert save_bundle_stream(bundles, path) == 20
        assert list(iter_bundle_stream(path)) == bundles

    def test_mismatched_mask_dims_names_proposal(self, tmp_path):
        bundle = synth_bundles(1, n_prop=2, height=6, width=6)[0]
        obj = bundle.to_dict()
        obj["proposals"][1]["mask"] = {"height": 3, "width": 3, "counts": [9]}
        with pytest.raises(ParseError, match=r"proposals\[1\]"):
            bundle_from_dict(obj)

    def test_unknown_schema_version(self):
        obj = synth_bundles(1, height=6, width=6)[0].to_dict()
        obj["schema_version"] = 99
        with pytest.raises(VersionError):
            bundle_from_dict(obj)

    def test_dimension_cap(self):
        obj = synth_bundles(1, height=6, width=6)[0].to_dict()
        obj["height"] = 20000
        with pytest.raises(ParseError, match="dimensions"):
            bundle_from_dict(obj)

    def test_empty_gt_rejected(self):
        obj = synth_bundles(1, height=6, width=6)[0].to_dict()
        obj["gt_masks"] = []
        with pytest.raises(ParseError, match="gt_masks"):
            bundle_from_dict(obj)

    def test_bad_json_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"schema_version": 1}\nnot json\n')
        with pytest.raises(ParseError, match="line"):
            list(iter_bundle_stream(path))


class TestBatchScore:
    def test_worker_count_invisible_in_results(self):
        bundles = synth_bundles(100, n_prop=4, height=12, width=12)
        one = batch_score(bundles, workers=1)
        eight = batch_score(bundles, workers=8)
        key = lambda o: o.image_id
        assert [(o.image_id, o.result) for o in sorted(one, key=key)] == [
            (o.image_id, o.result) for o in sorted(eight, key=key)
        ]

    def test_corrupt_bundle_reported_not_fatal(self):
        bundles = synth_bundles(10, n_prop=2, height=6, width=6)
        # all-zero ground truth passes file validation but cannot be scored
        broken = bundles[3].to_dict()
        broken["gt_masks"] = [{"height": 6, "width": 6, "counts": [36]}]
        bundles[3] = bundle_from_dict(broken)
        outcomes = batch_score(bundles, workers=4)
        errors = [o for o in outcomes if o.error is not None]
        assert len(errors) == 1
        assert "InvalidRequest" in errors[0].error
        assert sum(o.result is not None for o in outcomes) == 9

    def test_matches_single_scoring(self):
        bundles = synth_bundles(5, n_prop=3, height=8, width=8)
        outcomes = batch_score(bundles, workers=2)
        for bundle, outcome in zip(bundles, sorted(outcomes, key=lambda o: o.image_id)):
            assert outcome.result == seamcam_score(bundle.to_request())
            assert outcome.elapsed_s >= 0.0


class TestHardNegative:
    def test_argmax_selected(self):
        cset = CandidateSet(
            "img", "winner.png",
            tuple(Candidate(f"c{i}", i, result(s)) for i, s in enumerate((0.2, 0.9, 0.4))),
        )
        pair = select_hard_negative(cset)
        assert pair.loser_ref == "c1"
        assert pair.loser_score == 0.9
        assert pair.margin == pytest.approx(0.5)
        assert pair.winner_ref == "winner.png"

    def test_single_candidate_is_loser(self):
        cset = CandidateSet("img", "w", (Candidate("only", 3, result(0.1)),))
        pair = select_hard_negative(cset)
        assert pair.loser_ref == "only"
        assert pair.margin == 0.0

    def test_tie_breaks_to_lowest_prompt_index(self):
        cset = CandidateSet(
            "img", "w",
            (
                Candidate("late", 7, result(0.8)),
                Candidate("early", 2, result(0.8)),
            ),
        )
        assert select_hard_negative(cset).loser_ref == "early"

    def test_twelve_candidates(self):
        scores = [i / 20 for i in range(12)]
        cset = CandidateSet(
            "img", "w",
            tuple(Candidate(f"c{i}", i, result(s)) for i, s in enumerate(scores)),
        )
        pair = select_hard_negative(cset)
        assert pair.loser_ref == "c11"
        assert pair.loser_score == max(scores)

    def test_empty_rejected(self):
        with pytest.raises(EmptyCandidates):
            select_hard_negative(CandidateSet("img", "w", ()))


class TestSynth:
    def test_same_seed_identical(self):
        assert gen_synth_instance(42) == gen_synth_instance(42)

    def test_different_seed_differs(self):
        assert gen_synth_instance(1) != gen_synth_instance(2)

    def test_no_proposals_records_zero(self):
        inst = gen_synth_instance(5, n_prop=0)
        assert inst.oracle_detectability == 0.0
        assert inst.oracle_kept_count == 0

    def test_engine_reproduces_oracle(self):
        for seed in range(40):
            inst = gen_synth_instance(seed, height=16, width=16, n_prop=5)
            res = seamcam_score(inst.to_bundle().to_request())
            assert (res.intersection_px, res.union_px) == (
                inst.oracle_intersection_px,
                inst.oracle_union_px,
            )
            assert res.detectability == inst.oracle_detectability
            assert res.kept_count == inst.oracle_kept_count

    def test_prop_cap(self):
        with pytest.raises(ValueError):
            gen_synth_instance(1, n_prop=11)
