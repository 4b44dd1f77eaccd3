import csv

import numpy as np
import pytest

from omnisal import config
from omnisal.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from omnisal.data import Scanpath, load_raster, read_scanpaths, save_raster, write_raster, write_scanpaths
from omnisal.errors import DomainError, FormatError
from omnisal.fusion import unbias


def _report(path):
    with open(path, newline="") as fh:
        return {(r["image_id"], r["metric"]): float(r["value"]) for r in csv.DictReader(fh)}


@pytest.fixture
def maps(tmp_path):
    rng = np.random.default_rng(0)
    t = rng.random((16, 32)).astype(np.float32).astype(np.float64)
    s = rng.random((16, 32)).astype(np.float32).astype(np.float64)
    save_raster(tmp_path / "t.sal", t)
    save_raster(tmp_path / "s.sal", s)
    sps = [Scanpath("0", rng.random((6, 2))), Scanpath("1", rng.random((4, 2)))]
    write_scanpaths(tmp_path / "sp.csv", sps)
    return tmp_path, t, s


class TestMerge:
    def test_alpha_one_byte_identical(self, maps):
        d, t, _ = maps
        assert main(["merge", str(d / "t.sal"), str(d / "s.sal"), "--alpha", "1.0", "--out", str(d / "j.sal")]) == 0
        assert (d / "j.sal").read_bytes() == write_raster(t)

    def test_default_alpha(self, maps):
        d, t, s = maps
        assert main(["merge", str(d / "t.sal"), str(d / "s.sal"), "--out", str(d / "j.sal")]) == 0
        np.testing.assert_allclose(load_raster(d / "j.sal"), 0.7 * t + 0.3 * s, atol=1e-6)

    def test_dimension_conflict(self, maps):
        d, _, _ = maps
        code = main(["merge", str(d / "t.sal"), str(d / "s.sal"), "--width", "64", "--out", str(d / "j.sal")])
        assert code == EXIT_USAGE


class TestConfigPrecedence:
    def test_three_way(self, maps):
        d, t, s = maps
        args = ["merge", str(d / "t.sal"), str(d / "s.sal")]
        (d / "run.cfg").write_text("# fusion weights\nalpha = 1.0\n")
        assert main(args + ["--out", str(d / "default.sal")]) == 0
        assert main(args + ["--config", str(d / "run.cfg"), "--out", str(d / "file.sal")]) == 0
        assert main(args + ["--config", str(d / "run.cfg"), "--alpha", "0", "--out", str(d / "flag.sal")]) == 0
        np.testing.assert_allclose(load_raster(d / "default.sal"), 0.7 * t + 0.3 * s, atol=1e-6)
        np.testing.assert_array_equal(load_raster(d / "file.sal"), t)
        np.testing.assert_array_equal(load_raster(d / "flag.sal"), s)

    def test_resolve_layers(self):
        out = config.resolve({"alpha": 0.2, "seed": None}, {"alpha": 0.5, "seed": 9, "k": 2.0})
        assert out["alpha"] == 0.2 and out["seed"] == 9 and out["k"] == 2.0
        assert out["sigma_deg"] == config.DEFAULTS["sigma_deg"]

    def test_parse_errors(self):
        with pytest.raises(FormatError):
            config.parse_config("colour = blue\n")
        with pytest.raises(FormatError):
            config.parse_config("alpha 0.3\n")
        with pytest.raises(FormatError):
            config.parse_config("seed = 1.5\n")

    def test_validation(self):
        with pytest.raises(DomainError):
            config.resolve({"k": 0.5})

    def test_invalid_file_value_is_usage_error(self, maps):
        d, _, _ = maps
        (d / "bad.cfg").write_text("alpha = 3\n")
        code = main(["merge", str(d / "t.sal"), str(d / "s.sal"), "--config", str(d / "bad.cfg"),
                     "--out", str(d / "j.sal")])
        assert code == EXIT_USAGE


class TestPipeline:
    def test_matches_manual_chain(self, maps):
        d, _, _ = maps
        common = ["--sigma-deg", "15", "--alpha", "0.6"]
        assert main(["pipeline", str(d / "t.sal"), str(d / "sp.csv"), "--out", str(d / "final.sal")] + common) == 0
        assert main(["scanpath2map", str(d / "sp.csv"), "--width", "32", "--height", "16",
                     "--out", str(d / "smap.sal")] + common) == 0
        assert main(["merge", str(d / "t.sal"), str(d / "smap.sal"), "--out", str(d / "j.sal")] + common) == 0
        assert main(["equator-bias", "--width", "32", "--height", "16", "--out", str(d / "e.sal")]) == 0
        manual = unbias(load_raster(d / "j.sal"), load_raster(d / "e.sal"))
        # intermediate rasters are float32
        np.testing.assert_allclose(load_raster(d / "final.sal"), manual, atol=1e-6)

    def test_user_selection(self, maps):
        d, _, _ = maps
        assert main(["scanpath2map", str(d / "sp.csv"), "--user", "1", "--width", "32", "--height", "16",
                     "--out", str(d / "one.sal")]) == 0
        assert main(["scanpath2map", str(d / "sp.csv"), "--user", "7", "--out", str(d / "x.sal")]) == EXIT_DATA


class TestEvaluation:
    def test_eval_sal_identity(self, maps):
        d, t, _ = maps
        assert main(["eval-sal", str(d / "t.sal"), str(d / "t.sal"), "--fixations", str(d / "sp.csv"),
                     "--out", str(d / "r.csv")]) == 0
        r = _report(d / "r.csv")
        np.testing.assert_allclose(r[("t", "cc")], 1.0, atol=1e-12)
        np.testing.assert_allclose(r[("t", "sim")], 1.0, atol=1e-12)
        assert r[("t", "kld")] < 1e-5
        assert {m for _, m in r} == {"auc_judd", "auc_borji", "nss", "cc", "sim", "kld"}

    def test_eval_sal_directories_sorted(self, tmp_path):
        rng = np.random.default_rng(1)
        for sub in ("pred", "gt"):
            (tmp_path / sub).mkdir()
            for name in ("b", "a", "c"):
                save_raster(tmp_path / sub / f"{name}.sal", rng.random((4, 8)))
        assert main(["eval-sal", str(tmp_path / "pred"), str(tmp_path / "gt"), "--out", str(tmp_path / "r.csv")]) == 0
        with open(tmp_path / "r.csv") as fh:
            ids = [row["image_id"] for row in csv.DictReader(fh)]
        assert ids == sorted(ids) and set(ids) == {"a", "b", "c"}

    def test_eval_scan(self, maps):
        d, t, _ = maps
        assert main(["eval-scan", str(d / "sp.csv"), str(d / "sp.csv"), "--gt-map", str(d / "t.sal"),
                     "--out", str(d / "r.csv")]) == 0
        r = _report(d / "r.csv")
        assert set(r) == {("sp", "jarodzka"), ("sp", "hybrid_nss")}
        assert 0 < r[("sp", "jarodzka")] < 1

    def test_anova(self, tmp_path):
        rows = "group,value\n" + "".join(f"{g},{v}\n" for g, vals in (("a", (1, 2, 3)), ("b", (2, 3, 4)),
                                                                     ("c", (3, 4, 5))) for v in vals)
        (tmp_path / "v.csv").write_text(rows)
        assert main(["anova", str(tmp_path / "v.csv"), "--out", str(tmp_path / "r.csv")]) == 0
        r = _report(tmp_path / "r.csv")
        np.testing.assert_allclose(r[("anova", "f_stat")], 3.0, atol=1e-10)
        assert (r[("anova", "df_between")], r[("anova", "df_within")]) == (2, 6)

    def test_stdout_report(self, maps, capsys):
        d, _, _ = maps
        assert main(["eval-sal", str(d / "t.sal"), str(d / "s.sal")]) == 0
        assert capsys.readouterr().out.startswith("image_id,metric,value\n")


class TestExitCodes:
    def test_no_command(self, capsys):
        assert main([]) == EXIT_USAGE

    def test_unknown_flag(self, capsys):
        assert main(["equator-bias", "--bogus", "1"]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_invalid_alpha(self, maps):
        d, _, _ = maps
        assert main(["merge", str(d / "t.sal"), str(d / "s.sal"), "--alpha", "2", "--out", str(d / "j.sal")]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["merge", str(tmp_path / "no.sal"), str(tmp_path / "no.sal"), "--out", "x"]) == EXIT_DATA

    def test_corrupt_raster(self, maps, capsys):
        d, _, _ = maps
        (d / "bad.sal").write_bytes(b"SAL1\x02\x00")
        assert main(["merge", str(d / "bad.sal"), str(d / "s.sal"), "--out", str(d / "j.sal")]) == EXIT_DATA
        assert "truncated" in capsys.readouterr().err

    def test_shape_mismatch(self, maps):
        d, _, _ = maps
        save_raster(d / "small.sal", np.ones((4, 4)))
        assert main(["merge", str(d / "t.sal"), str(d / "small.sal"), "--out", str(d / "j.sal")]) == EXIT_DATA

    def test_missing_out(self, maps):
        d, _, _ = maps
        assert main(["equator-bias"]) == EXIT_USAGE


class TestModelCommands:
    def test_synth_deterministic(self, tmp_path):
        args = ["synth", "--width", "32", "--height", "16", "--n-scenes", "3", "--n-scanpaths", "2", "--seed", "5"]
        assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
        assert "split.csv" in names and "scene002.img.sal" in names
        for n in names:
            assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()

    def test_train_predict(self, tmp_path):
        assert main(["synth", "--width", "32", "--height", "16", "--n-scenes", "2", "--n-scanpaths", "2",
                     "--out", str(tmp_path / "data")]) == 0
        assert main(["train", str(tmp_path / "data"), "--steps", "2", "--lr", "1e-3",
                     "--out", str(tmp_path / "m.spw")]) == 0
        with open(tmp_path / "m.loss.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6 and {r["stage"] for r in rows} == {"stage1", "stage2"}
        assert main(["predict", str(tmp_path / "m.spw"), str(tmp_path / "data" / "scene000.img.sal"),
                     "--out", str(tmp_path / "pred")]) == 0
        assert load_raster(tmp_path / "pred" / "scene000.primary.sal").shape == (16, 32)
        assert load_raster(tmp_path / "pred" / "scene000.final.sal").shape == (16, 32)
        assert len(read_scanpaths(tmp_path / "pred" / "scene000.pred.csv")[0]) == 100

    def test_train_empty_directory(self, tmp_path):
        assert main(["train", str(tmp_path), "--out", str(tmp_path / "m.spw")]) == EXIT_DATA
