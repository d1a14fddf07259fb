import numpy as np
import pytest

from vqstudy.ratings import compute_mos, subject_stats, zscore_rescale
from vqstudy.studyio import (
    IngestError,
    StudyManifest,
    VideoRecord,
    load_manifest,
    read_mos,
    read_predictions,
    read_ratings,
    save_manifest,
    write_mos,
    write_predictions,
    write_ratings,
)
from vqstudy.synthetic import make_manifest, make_study


def small_manifest():
    videos = (
        VideoRecord("v1", "s1", "30M"),
        VideoRecord("v2", "s1", "5M"),
        VideoRecord("v3", "s2", "30M"),
    )
    return StudyManifest(videos, ("alice", "bob"), (1.0, 10.0))


class TestManifest:
    def test_roundtrip(self, tmp_path):
        manifest = make_manifest(n_sources=4, n_subjects=3)
        path = tmp_path / "m.json"
        save_manifest(manifest, path)
        assert load_manifest(path) == manifest

    def test_duplicate_video_rejected(self):
        with pytest.raises(ValueError, match="duplicate video"):
            StudyManifest((VideoRecord("v", "s"), VideoRecord("v", "s")), ())

    def test_unknown_view_rejected(self):
        with pytest.raises(ValueError, match="unknown views"):
            VideoRecord("v", "s", views=("upside-down",))


class TestReadRatings:
    def test_well_formed_rows(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("subject_id,video_id,score\nalice,v1,5\nalice,v2,6\nbob,v1,7\n")
        matrix = read_ratings(path, small_manifest())
        assert matrix.n_ratings == 3
        assert matrix.subjects == ("alice", "bob")
        assert matrix.videos == ("v1", "v2")  # v3 has no ratings and is dropped

    def test_out_of_scale_cites_row(self, tmp_path):
        path = tmp_path / "r.csv"
        rows = ["subject_id,video_id,score"] + [f"alice,v{i},5" for i in (1, 2)] + ["bob,v1,11"]
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(IngestError, match="row 3.*11.0 outside scale"):
            read_ratings(path, small_manifest())

    def test_duplicate_names_both_rows(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("subject_id,video_id,score\nalice,v1,5\nbob,v2,6\nalice,v1,7\n")
        with pytest.raises(IngestError, match="rows 1 and 3: duplicate"):
            read_ratings(path, small_manifest())

    def test_all_problems_reported_together(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(
            "subject_id,video_id,score\n"
            "alice,ghost,5\n"      # unknown video
            "carol,v1,5\n"         # unknown subject
            "alice,v1,99\n"        # out of scale
            "bob,v1,5\n"
            "bob,v1,6\n"           # duplicate
            "bob,v2,abc\n"         # not a number
        )
        with pytest.raises(IngestError) as err:
            read_ratings(path, small_manifest())
        problems = err.value.problems
        assert len(problems) == 5
        assert any("row 1" in p and "ghost" in p for p in problems)
        assert any("row 2" in p and "carol" in p for p in problems)
        assert any("row 3" in p for p in problems)
        assert any("rows 4 and 5" in p for p in problems)
        assert any("row 6" in p for p in problems)

    def test_without_manifest_uses_appearance_order(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("subject_id,video_id,score\ns2,vB,5\ns1,vA,6\ns2,vA,7\ns1,vB,4\n")
        matrix = read_ratings(path)
        assert matrix.subjects == ("s2", "s1")
        assert matrix.videos == ("vB", "vA")
        assert matrix.n_ratings == 4

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("a,b,c\nx,y,5\n")
        with pytest.raises(IngestError, match="expected header"):
            read_ratings(path)

    def test_ratings_roundtrip(self, tmp_path):
        matrix = make_study(4, 5, seed=8)
        path = tmp_path / "r.csv"
        write_ratings(matrix, path)
        back = read_ratings(path)
        assert back.subjects == matrix.subjects
        assert back.videos == matrix.videos
        assert np.array_equal(back.scores, matrix.scores)


class TestReadPredictions:
    def test_views_grouped(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(
            "video_id,view,score\nv1,left,0.5\nv2,left,0.25\nv1,right,0.75\nv1,fusion,0.6\n"
        )
        preds = read_predictions(path, small_manifest())
        assert set(preds) == {"left", "right", "fusion"}
        assert preds["left"].videos == ("v1", "v2")
        assert preds["left"].scores.tolist() == [0.5, 0.25]

    def test_unknown_view_and_video(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("video_id,view,score\nv1,top,0.5\nghost,left,0.5\n")
        with pytest.raises(IngestError) as err:
            read_predictions(path, small_manifest())
        assert len(err.value.problems) == 2

    def test_duplicate_prediction(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("video_id,view,score\nv1,left,0.5\nv1,left,0.25\n")
        with pytest.raises(IngestError, match="rows 1 and 2"):
            read_predictions(path)


class TestMosRoundtrip:
    def test_reingestion_is_exact(self, tmp_path):
        matrix = make_study(6, 9, seed=13)
        table = compute_mos(zscore_rescale(matrix, subject_stats(matrix)), level=0.9)
        path = tmp_path / "mos.csv"
        write_mos(table, path, {"seed": 3, "config_sha256": "ab"})
        back = read_mos(path)
        assert back.videos == table.videos
        assert np.array_equal(back.mos, table.mos)
        assert np.array_equal(back.std, table.std)
        assert np.array_equal(back.n, table.n)
        assert np.array_equal(back.ci, table.ci)
        assert back.level == table.level

    def test_comments_carry_metadata(self, tmp_path):
        matrix = make_study(3, 4, seed=2)
        table = compute_mos(zscore_rescale(matrix))
        path = tmp_path / "mos.csv"
        write_mos(table, path, {"seed": 42, "config_sha256": "beef"})
        text = path.read_text()
        assert "# seed=42" in text
        assert "# config_sha256=beef" in text

    def test_predictions_writer_roundtrip(self, tmp_path):
        from vqstudy.metrics import PredictionSet

        sets = [
            PredictionSet(("v1", "v2"), [0.1, 0.9], "left"),
            PredictionSet(("v1", "v2"), [0.2, 0.8], "right"),
        ]
        path = tmp_path / "p.csv"
        write_predictions(sets, path)
        back = read_predictions(path)
        assert np.array_equal(back["left"].scores, sets[0].scores)
        assert np.array_equal(back["right"].scores, sets[1].scores)
