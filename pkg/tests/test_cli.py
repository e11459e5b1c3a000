import json
from pathlib import Path

import numpy as np
import pytest
from scipy.io import wavfile

from conftest import SR, tone
from pathintel.cli import main
from pathintel.codes import CodeKind, load_code_matrix

GOLDEN_REPORT = Path(__file__).parent / "golden" / "synthetic_report.json"


def write_tone_wav(path, pad_s=0.5, tone_s=1.0, freq=220.0):
    x = np.concatenate([np.zeros(int(pad_s * SR)), tone(freq, tone_s),
                        np.zeros(int(pad_s * SR))]).astype(np.float32)
    wavfile.write(path, SR, x)
    return path


class TestPreprocessCommand:
    def test_silence_padded_tone(self, tmp_path, capsys):
        src = write_tone_wav(tmp_path / "in.wav")
        out = tmp_path / "out.wav"
        assert main(["preprocess", str(src), str(out), "--trim", "0.1"]) == 0
        rate, data = wavfile.read(out)
        assert rate == SR
        assert abs(len(data) / SR - 1.0) < 0.1  # roughly the tone duration
        assert "voiced segment" in capsys.readouterr().out

    def test_trim_zero_passthrough(self, tmp_path):
        src = write_tone_wav(tmp_path / "in.wav")
        out = tmp_path / "out.wav"
        assert main(["preprocess", str(src), str(out), "--trim", "0"]) == 0

    def test_unreadable_path(self, tmp_path, capsys):
        missing = tmp_path / "missing.wav"
        rc = main(["preprocess", str(missing), str(tmp_path / "o.wav")])
        assert rc != 0
        assert "missing.wav" in capsys.readouterr().err


class TestFeaturesCommand:
    def test_mel_dump_round_trips(self, tmp_path):
        src = write_tone_wav(tmp_path / "in.wav")
        mel_out = tmp_path / "in.mel.cdm"
        pitch_out = tmp_path / "in.f0.csv"
        rc = main(["features", str(src), str(mel_out),
                   "--pitch-out", str(pitch_out)])
        assert rc == 0
        m = load_code_matrix(mel_out)
        assert m.kind is CodeKind.RAW_MEL
        assert m.C == 80
        lines = pitch_out.read_text().splitlines()
        assert lines[0] == "frame,f0_hz"
        assert len(lines) == m.T + 1


class TestScorePairCommand:
    def test_same_file_twice_scores_zero(self, tmp_path, capsys):
        src = write_tone_wav(tmp_path / "in.wav")
        assert main(["score-pair", str(src), str(src)]) == 0
        out = capsys.readouterr().out
        assert "index=0.000000000" in out
        assert "dtw_cost=0.000000" in out

    def test_cdm_pair_and_path_dump(self, tmp_path, capsys):
        golden = Path(__file__).parent / "golden" / "content_16x3.cdm"
        dump = tmp_path / "path.json"
        rc = main(["score-pair", str(golden), str(golden),
                   "--dump-path", str(dump)])
        assert rc == 0
        doc = json.loads(dump.read_text())
        assert doc["cost"] == 0.0
        assert doc["pairs"] == [[0, 0], [1, 1], [2, 2]]

    def test_mismatched_kinds_fail(self, tmp_path, capsys):
        golden = Path(__file__).parent / "golden" / "content_16x3.cdm"
        src = write_tone_wav(tmp_path / "in.wav")  # loads as raw_mel
        rc = main(["score-pair", str(golden), str(src)])
        assert rc == 1
        assert "kind mismatch" in capsys.readouterr().err


class TestEvaluateCommand:
    def test_report_matches_golden(self, synthetic_corpus, tmp_path):
        manifest, (f, m) = synthetic_corpus
        out = tmp_path / "report.json"
        rc = main(["evaluate", "--manifest", str(manifest),
                   "--refpair", f"{f},{m}", "--provider", "cdm-files",
                   "--out", str(out)])
        assert rc == 0
        got = json.loads(out.read_text())
        got.pop("meta")
        want = json.loads(GOLDEN_REPORT.read_text())
        assert got == want

    def test_repeated_runs_byte_identical_minus_meta(self, synthetic_corpus,
                                                     tmp_path):
        manifest, (f, m) = synthetic_corpus
        docs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            main(["evaluate", "--manifest", str(manifest),
                  "--refpair", f"{f},{m}", "--provider", "cdm-files",
                  "--out", str(out), "--threads", "3"])
            doc = json.loads(out.read_text())
            doc.pop("meta")
            docs.append(json.dumps(doc, sort_keys=True))
        assert docs[0] == docs[1]

    def test_scatter_and_svg_outputs(self, synthetic_corpus, tmp_path):
        manifest, (f, m) = synthetic_corpus
        out = tmp_path / "report.json"
        csv_out = tmp_path / "scatter.csv"
        svg_out = tmp_path / "scatter.svg"
        rc = main(["evaluate", "--manifest", str(manifest),
                   "--refpair", f"{f},{m}", "--provider", "cdm-files",
                   "--out", str(out), "--scatter-csv", str(csv_out),
                   "--svg", str(svg_out)])
        assert rc == 0
        lines = csv_out.read_text().splitlines()
        assert lines[0] == "speaker_id,group,subjective,index"
        assert len(lines) == 11  # 10 subjects + header
        assert svg_out.read_text().startswith("<?xml")

    def test_missing_manifest_column(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("speaker_id,gender,group,utterance_id,path\n")
        rc = main(["evaluate", "--manifest", str(bad), "--refpair", "A,B",
                   "--out", str(tmp_path / "r.json")])
        assert rc == 1
        assert "intelligibility" in capsys.readouterr().err

    def test_report_validates_against_schema(self, synthetic_corpus, tmp_path):
        jsonschema = pytest.importorskip("jsonschema")
        manifest, (f, m) = synthetic_corpus
        out = tmp_path / "report.json"
        main(["evaluate", "--manifest", str(manifest),
              "--refpair", f"{f},{m}", "--provider", "cdm-files",
              "--out", str(out)])
        schema = json.loads(
            (Path(__file__).parent.parent / "docs" / "report.schema.json")
            .read_text()
        )
        jsonschema.validate(json.loads(out.read_text()), schema)


class TestSubsampleCommand:
    def test_reproducible_summary(self, synthetic_corpus, tmp_path, capsys):
        manifest, (f, m) = synthetic_corpus
        outs = []
        for name in ("s1.json", "s2.json"):
            out = tmp_path / name
            rc = main(["subsample", "--manifest", str(manifest),
                       "--refpair", f"{f},{m}", "--provider", "cdm-files",
                       "--n", "5", "--iterations", "40", "--seed", "7",
                       "--out", str(out)])
            assert rc == 0
            doc = json.loads(out.read_text())
            doc.pop("meta")
            outs.append(doc)
        assert outs[0] == outs[1]
        assert outs[0]["seed"] == 7


class TestExportScatter:
    def test_round_trip_from_report(self, synthetic_corpus, tmp_path):
        manifest, (f, m) = synthetic_corpus
        report = tmp_path / "report.json"
        main(["evaluate", "--manifest", str(manifest),
              "--refpair", f"{f},{m}", "--provider", "cdm-files",
              "--out", str(report)])
        csv_out = tmp_path / "sc.csv"
        svg_out = tmp_path / "sc.svg"
        rc = main(["export-scatter", "--report", str(report),
                   "--csv", str(csv_out), "--svg", str(svg_out)])
        assert rc == 0
        assert csv_out.exists() and svg_out.exists()


class TestConfig:
    def test_config_file_and_flag_precedence(self, tmp_path, capsys):
        src = write_tone_wav(tmp_path / "in.wav")
        cfg = tmp_path / "run.cfg"
        cfg.write_text("trim = 0.3\nvad_threshold_db = -40  # comment\n")
        out = tmp_path / "out.wav"
        # flag overrides the config file's trim
        rc = main(["preprocess", str(src), str(out), "--config", str(cfg),
                   "--trim", "0.0"])
        assert rc == 0

    def test_unknown_config_key(self, tmp_path, capsys):
        src = write_tone_wav(tmp_path / "in.wav")
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus = 1\n")
        rc = main(["preprocess", str(src), str(tmp_path / "o.wav"),
                   "--config", str(cfg)])
        assert rc == 1
        assert "bogus" in capsys.readouterr().err

    def test_help_documents_defaults(self, capsys):
        with pytest.raises(SystemExit):
            main(["preprocess", "--help"])
        out = capsys.readouterr().out
        assert "0.15" in out    # trim default matches the pipeline constant
        assert "-35" in out     # VAD threshold
        assert "25" in out and "10" in out  # VAD frame/hop
