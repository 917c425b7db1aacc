"""End-to-end coverage of the command-line front end.

Every test drives ``detscore.cli.main`` in process so that stdout can be
compared, at full 17-digit precision, against the library calls the commands
wrap.
"""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from detscore import (
    CostParams,
    LabeledScores,
    ScoreMatrix,
    TrialKey,
    actual_bayes_error,
    align_scores_to_key,
    cllr,
    effective_prior,
    fuse_matrices,
    gaussian_llr,
    gaussian_scores,
    min_bayes_error,
    min_cllr,
    model_from_text,
    prbep,
    rocch,
    rocch_eer,
)
from detscore import io as dio
from detscore.cli import main


def _fmt(v):
    return format(float(v), ".17g")


def _table(stdout):
    rows = [line.split("\t") for line in stdout.strip().split("\n")]
    return {k: v for k, v in rows}


def _write_pair(tmp_path, tar, non, stem="d"):
    """Write a one-model scores file and matching key; return the two paths."""
    tar = np.asarray(tar, dtype=float)
    non = np.asarray(non, dtype=float)
    segs = tuple(f"t{i}" for i in range(len(tar))) + tuple(f"n{i}" for i in range(len(non)))
    vals = np.concatenate([tar, non])[None, :]
    matrix = ScoreMatrix(("sys",), segs, np.ones_like(vals, dtype=bool), vals)
    key = TrialKey(("sys",), segs, np.array([[1] * len(tar) + [2] * len(non)]))
    sp = tmp_path / f"{stem}_scores.txt"
    kp = tmp_path / f"{stem}_key.txt"
    sp.write_text(dio.emit_text_scores(matrix))
    kp.write_text(dio.emit_text_key(key))
    return sp, kp


def _synthetic_pair(tmp_path, n_tar, n_non, seed, stem="g", as_llr=False):
    ls = gaussian_scores(n_tar, n_non, seed=seed)
    tar, non = ls.tar, ls.non
    if as_llr:
        tar, non = gaussian_llr(tar), gaussian_llr(non)
    return _write_pair(tmp_path, tar, non, stem=stem)


@pytest.fixture
def d1_files(tmp_path):
    return _write_pair(tmp_path, [1.0, 2.0], [0.0, 1.5])


class TestConvert:
    def test_text_binary_text_is_normalizing(self, tmp_path, d1_files):
        sp, _ = d1_files
        binp = tmp_path / "s.bin"
        back = tmp_path / "s2.txt"
        assert main(["convert", str(sp), str(binp), "--to", "binary"]) == 0
        assert dio.sniff_binary(binp.read_bytes())
        assert main(["convert", str(binp), str(back), "--to", "text"]) == 0
        canonical = dio.emit_text_scores(dio.parse_text_scores(sp.read_text()))
        assert back.read_text() == canonical

    def test_binary_round_trip_byte_identical(self, tmp_path, d1_files):
        _, kp = d1_files
        b1 = tmp_path / "k1.bin"
        t1 = tmp_path / "k1.txt"
        b2 = tmp_path / "k2.bin"
        main(["convert", str(kp), str(b1), "--to", "binary"])
        main(["convert", str(b1), str(t1), "--to", "text"])
        main(["convert", str(t1), str(b2), "--to", "binary"])
        assert b1.read_bytes() == b2.read_bytes()

    def test_kind_detection_picks_key(self, tmp_path, d1_files):
        # no --kind given: the target/nontarget payload marks this as a key
        _, kp = d1_files
        out = tmp_path / "k.bin"
        main(["convert", str(kp), str(out), "--to", "binary"])
        decoded = dio.decode_any(out.read_bytes())
        assert isinstance(decoded, TrialKey)

    def test_malformed_text_is_a_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("sys\tseg\tnot_a_number\n")
        assert main(["convert", str(bad), str(tmp_path / "o.bin"), "--to", "binary"]) == 2
        err = capsys.readouterr().err
        assert "bad.txt" in err and "line 1" in err


class TestStats:
    def test_key_counts(self, d1_files, capsys):
        _, kp = d1_files
        assert main(["stats", str(kp)]) == 0
        table = _table(capsys.readouterr().out)
        assert table["models"] == "1"
        assert table["segments"] == "4"
        assert table["targets"] == "2"
        assert table["nontargets"] == "2"

    def test_score_range(self, d1_files, capsys):
        sp, _ = d1_files
        assert main(["stats", str(sp)]) == 0
        table = _table(capsys.readouterr().out)
        assert table["scored_trials"] == "4"
        assert float(table["score_min"]) == 0.0
        assert float(table["score_max"]) == 2.0


class TestEval:
    def test_d1_reference_values(self, d1_files, capsys):
        sp, kp = d1_files
        assert main(["eval", "--scores", str(sp), "--key", str(kp), "--ptar", "0.5", "--llr"]) == 0
        table = _table(capsys.readouterr().out)
        assert float(table["min_dcf"]) == 0.25
        assert float(table["min_dcf_norm"]) == 0.5
        assert float(table["rocch_eer"]) == 0.25
        assert float(table["min_cllr"]) == 0.5
        assert float(table["prbep"]) == 0.5
        assert float(table["cllr"]) == pytest.approx(1.0224199984532492, abs=1e-15)
        assert table["x_miss30"] == "never" and table["x_fa30"] == "never"

    def test_golden_equality_with_library(self, tmp_path, capsys):
        sp, kp = _synthetic_pair(tmp_path, 150, 250, seed=7, as_llr=True)
        assert main(["eval", "--scores", str(sp), "--key", str(kp), "--ptar", "0.3", "--llr"]) == 0
        table = _table(capsys.readouterr().out)

        scores = dio.parse_text_scores(sp.read_text())
        key = dio.parse_text_key(kp.read_text())
        labeled, _ = align_scores_to_key(scores, key)
        curve = rocch(labeled)
        assert table["effective_prior"] == _fmt(0.3)
        assert table["act_dcf_norm"] == _fmt(actual_bayes_error(labeled, 0.3).normalized)
        assert table["min_dcf_norm"] == _fmt(min_bayes_error(curve, 0.3).normalized)
        assert table["cllr"] == _fmt(cllr(labeled))
        assert table["min_cllr"] == _fmt(min_cllr(labeled))
        assert table["rocch_eer"] == _fmt(rocch_eer(curve))
        assert table["prbep"] == _fmt(prbep(labeled))

    def test_cost_triple_route(self, d1_files, capsys):
        sp, kp = d1_files
        assert main([
            "eval", "--scores", str(sp), "--key", str(kp),
            "--prior", "0.01", "--cmiss", "10", "--cfa", "1",
        ]) == 0
        table = _table(capsys.readouterr().out)
        pi = effective_prior(CostParams(0.01, 10.0, 1.0))
        assert table["effective_prior"] == _fmt(pi)
        assert float(table["effective_prior"]) == pytest.approx(0.0917431192660551, abs=1e-15)
        # unnormalized cost carries the prior-weighted cost scale
        scale = 0.01 * 10.0 + 0.99 * 1.0
        labeled = LabeledScores([1.0, 2.0], [0.0, 1.5])
        expected = scale * min_bayes_error(rocch(labeled), pi).raw
        assert table["min_dcf"] == _fmt(expected)

    def test_dr30_thresholds_reported(self, tmp_path, capsys):
        sp, kp = _synthetic_pair(tmp_path, 500, 800, seed=3, as_llr=True)
        main(["eval", "--scores", str(sp), "--key", str(kp), "--llr"])
        table = _table(capsys.readouterr().out)
        assert table["x_miss30"] != "never"
        assert float(table["x_fa30"]) < float(table["x_miss30"])

    def test_missing_scores_warns(self, tmp_path, capsys):
        sp, kp = _write_pair(tmp_path, [1.0, 2.0], [0.0, 1.5])
        # drop one scored trial but keep the key entry
        matrix = dio.parse_text_scores(sp.read_text())
        valid = matrix.valid.copy()
        valid[0, 0] = False
        sp.write_text(dio.emit_text_scores(
            ScoreMatrix(matrix.model_names, matrix.segment_names, valid, matrix.score)
        ))
        assert main(["eval", "--scores", str(sp), "--key", str(kp)]) == 0
        captured = capsys.readouterr()
        assert "warning: 1 labeled trials have no score" in captured.err
        assert _table(captured.out)["n_targets"] == "1"


class TestCalibrate:
    def test_affine_model_file_and_apply(self, tmp_path, capsys):
        sp, kp = _synthetic_pair(tmp_path, 300, 300, seed=11)
        model_path = tmp_path / "model.txt"
        out_path = tmp_path / "cal.txt"
        code = main([
            "calibrate", "--dev-scores", str(sp), "--dev-key", str(kp),
            "--model-out", str(model_path), "--apply", str(sp), "--scores-out", str(out_path),
        ])
        assert code == 0
        model = model_from_text(model_path.read_text())
        assert model.weights.shape == (1,)

        matrix = dio.parse_text_scores(sp.read_text())
        expected = fuse_matrices(model, [matrix])
        applied = dio.parse_text_scores(out_path.read_text())
        np.testing.assert_array_equal(applied.score, expected.score)

        key = dio.parse_text_key(kp.read_text())
        raw, _ = align_scores_to_key(matrix, key)
        calibrated, _ = align_scores_to_key(applied, key)
        assert cllr(calibrated) < cllr(raw)

    def test_pav_apply_reaches_min_cllr(self, tmp_path):
        sp, kp = _synthetic_pair(tmp_path, 200, 200, seed=5)
        out_path = tmp_path / "cal.txt"
        code = main([
            "calibrate", "--method", "pav", "--dev-scores", str(sp), "--dev-key", str(kp),
            "--apply", str(sp), "--scores-out", str(out_path),
        ])
        assert code == 0
        key = dio.parse_text_key(kp.read_text())
        raw, _ = align_scores_to_key(dio.parse_text_scores(sp.read_text()), key)
        calibrated, _ = align_scores_to_key(dio.parse_text_scores(out_path.read_text()), key)
        assert cllr(calibrated) == pytest.approx(min_cllr(raw), abs=1e-12)

    def test_binary_output(self, tmp_path):
        sp, kp = _synthetic_pair(tmp_path, 50, 50, seed=2)
        out_path = tmp_path / "cal.bin"
        main([
            "calibrate", "--dev-scores", str(sp), "--dev-key", str(kp),
            "--apply", str(sp), "--scores-out", str(out_path), "--binary",
        ])
        assert dio.sniff_binary(out_path.read_bytes())
        dio.decode_scores(out_path.read_bytes())

    def test_apply_without_output_is_an_error(self, tmp_path, d1_files, capsys):
        sp, kp = d1_files
        assert main([
            "calibrate", "--dev-scores", str(sp), "--dev-key", str(kp), "--apply", str(sp),
        ]) == 2
        assert "--scores-out" in capsys.readouterr().err


class TestFuse:
    def _two_systems(self, tmp_path):
        rng = np.random.default_rng(31)
        good = gaussian_scores(400, 400, seed=31)
        noisy_tar = good.tar + rng.normal(0, 3, 400)
        noisy_non = good.non + rng.normal(0, 3, 400)
        sp1, kp = _write_pair(tmp_path, good.tar, good.non, stem="a")
        sp2, _ = _write_pair(tmp_path, noisy_tar, noisy_non, stem="b")
        return sp1, sp2, kp

    def test_model_and_apply_match_library(self, tmp_path):
        sp1, sp2, kp = self._two_systems(tmp_path)
        model_path = tmp_path / "fusion.txt"
        out_path = tmp_path / "fused.txt"
        code = main([
            "fuse", "--dev-scores", f"{sp1},{sp2}", "--dev-key", str(kp),
            "--model-out", str(model_path), "--apply", f"{sp1},{sp2}",
            "--scores-out", str(out_path),
        ])
        assert code == 0
        model = model_from_text(model_path.read_text())
        assert model.weights.shape == (2,)
        mats = [dio.parse_text_scores(p.read_text()) for p in (sp1, sp2)]
        expected = fuse_matrices(model, mats)
        applied = dio.parse_text_scores(out_path.read_text())
        np.testing.assert_array_equal(applied.score, expected.score)

    def test_quality_tables(self, tmp_path):
        sp1, sp2, kp = self._two_systems(tmp_path)
        key = dio.parse_text_key(kp.read_text())
        qm = tmp_path / "qm.txt"
        qs = tmp_path / "qs.txt"
        qm.write_text("".join(f"{n}\t1.0\n" for n in key.model_names))
        qs.write_text("".join(f"{n}\t{i % 2}.0\n" for i, n in enumerate(key.segment_names)))
        model_path = tmp_path / "fusion.txt"
        out_path = tmp_path / "fused.txt"
        code = main([
            "fuse", "--dev-scores", f"{sp1},{sp2}", "--dev-key", str(kp),
            "--quality-models", str(qm), "--quality-segments", str(qs),
            "--model-out", str(model_path), "--apply", f"{sp1},{sp2}",
            "--scores-out", str(out_path),
        ])
        assert code == 0
        model = model_from_text(model_path.read_text())
        assert model.quality_weights is not None
        mats = [dio.parse_text_scores(p.read_text()) for p in (sp1, sp2)]
        expected = fuse_matrices(
            model, mats,
            dio.parse_text_quality(qm.read_text()),
            dio.parse_text_quality(qs.read_text()),
        )
        applied = dio.parse_text_scores(out_path.read_text())
        np.testing.assert_array_equal(applied.score, expected.score)

    def test_missing_quality_side_is_an_error(self, tmp_path, capsys):
        sp1, sp2, kp = self._two_systems(tmp_path)
        qm = tmp_path / "qm.txt"
        qm.write_text("sys\t1.0\n")
        assert main([
            "fuse", "--dev-scores", f"{sp1},{sp2}", "--dev-key", str(kp),
            "--quality-models", str(qm),
        ]) == 2


class TestPlotCommands:
    def test_det_svg_and_csv(self, tmp_path):
        sp, kp = _synthetic_pair(tmp_path, 100, 100, seed=9)
        svg = tmp_path / "det.svg"
        csv = tmp_path / "det.csv"
        code = main([
            "plot-det", "--scores", str(sp), "--key", str(kp),
            "--svg", str(svg), "--csv", str(csv), "--title", "demo",
        ])
        assert code == 0
        root = ET.fromstring(svg.read_bytes())
        assert root.tag.endswith("svg")
        header = csv.read_text().split("\n", 1)[0]
        assert header == "p_miss,p_fa,probit_p_miss,probit_p_fa"

    def test_nber_svg_with_opoints(self, tmp_path):
        sp, kp = _synthetic_pair(tmp_path, 100, 100, seed=9, as_llr=True)
        svg = tmp_path / "nber.svg"
        code = main([
            "plot-nber", "--scores", str(sp), "--key", str(kp),
            "--svg", str(svg), "--opoint", "-4", "--opoint", "-2",
        ])
        assert code == 0
        ns = "{http://www.w3.org/2000/svg}"
        root = ET.fromstring(svg.read_bytes())
        assert len(root.findall(f".//{ns}polyline")) == 4

    def test_nber_csv_grid_bounds(self, tmp_path):
        sp, kp = _synthetic_pair(tmp_path, 60, 60, seed=4, as_llr=True)
        csv = tmp_path / "nber.csv"
        main([
            "plot-nber", "--scores", str(sp), "--key", str(kp),
            "--csv", str(csv), "--xmin", "-5", "--xmax", "-1", "--points", "9",
        ])
        rows = csv.read_text().strip().split("\n")
        assert len(rows) == 10
        assert float(rows[1].split(",")[0]) == -5.0
        assert float(rows[-1].split(",")[0]) == -1.0

    def test_no_output_requested(self, tmp_path, d1_files, capsys):
        sp, kp = d1_files
        assert main(["plot-det", "--scores", str(sp), "--key", str(kp)]) == 2
        assert "nothing to do" in capsys.readouterr().err


class TestBench:
    def test_deterministic_stdout(self, capsys):
        args = ["bench", "--n-tar", "2000", "--n-non", "3000", "--seed", "12"]
        assert main(args) == 0
        first = capsys.readouterr()
        assert main(args) == 0
        second = capsys.readouterr()
        assert first.out == second.out
        assert "sweep_seconds" in first.err and "pav_seconds" in first.err
        table = _table(first.out)
        assert table["n_targets"] == "2000"
        assert 0.0 < float(table["rocch_eer"]) < 0.5


class TestExitCodes:
    def test_usage_error_is_one(self):
        with pytest.raises(SystemExit) as exc_info:
            main(["eval", "--scores", "x.txt"])  # missing --key
        assert exc_info.value.code == 1

    def test_unknown_command_is_one(self):
        with pytest.raises(SystemExit) as exc_info:
            main(["frobnicate"])
        assert exc_info.value.code == 1

    def test_missing_file_is_two(self, tmp_path, capsys):
        missing = tmp_path / "absent.txt"
        assert main(["stats", str(missing)]) == 2
        assert "absent.txt" in capsys.readouterr().err

    def test_disjoint_key_is_two(self, tmp_path, d1_files, capsys):
        sp, _ = d1_files
        other = TrialKey(("other",), ("s",), np.array([[1]]))
        kp = tmp_path / "other_key.txt"
        kp.write_text(dio.emit_text_key(other))
        assert main(["eval", "--scores", str(sp), "--key", str(kp)]) == 2
        assert "detscore: error:" in capsys.readouterr().err
