import json
import shutil

import numpy as np
import pytest

from gridclust.cli import main

from test_ingest import constant_lines, manifest_doc, write_gts


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="session")
def km_out(demo_dataset, tmp_path_factory):
    root, _ = demo_dataset
    out = tmp_path_factory.mktemp("km")
    assert run("kmeans", "--dataset", root, "--k", "2,3", "--restarts", "3",
               "--out", out) == 0
    return out


@pytest.fixture(scope="session")
def mi_out(demo_dataset, tmp_path_factory):
    root, _ = demo_dataset
    out = tmp_path_factory.mktemp("mi")
    assert run("mistic", "--dataset", root, "--min-years", "3", "--out", out) == 0
    return out


class TestValidate:
    def test_clean_demo_exits_zero(self, demo_dataset):
        root, _ = demo_dataset
        assert run("validate", "--dataset", root) == 0

    def test_tampered_dataset_exits_two(self, demo_dataset, tmp_path, capsys):
        root, _ = demo_dataset
        bad = tmp_path / "bad"
        shutil.copytree(root, bad)
        payload = bad / "data" / "1991.csv"
        lines = payload.read_text().splitlines()
        payload.write_text("\n".join(lines[:-1]) + "\n")
        assert run("validate", "--dataset", bad) == 2
        out = capsys.readouterr().out
        assert "1991" in out and "360" in out

    def test_missing_manifest_exits_three(self, tmp_path):
        assert run("validate", "--dataset", tmp_path / "nope") == 3


class TestKmeansCommand:
    def test_sweep_outputs(self, km_out):
        assert (km_out / "labels_k2.csv").exists()
        assert (km_out / "labels_k3.csv").exists()
        assert (km_out / "map_k2.svg").exists()
        report = json.loads((km_out / "kmeans_report.json").read_text())
        assert [r["k"] for r in report["runs"]] == [2, 3]
        meta = json.loads((km_out / "run_meta.json").read_text())
        assert meta["command"] == "kmeans"
        assert meta["inputs"]

    def test_three_k_sweep(self, demo_dataset, tmp_path):
        root, _ = demo_dataset
        out = tmp_path / "sweep"
        assert run("kmeans", "--dataset", root, "--k", "8,10,12", "--restarts", "1",
                   "--out", out) == 0
        report = json.loads((out / "kmeans_report.json").read_text())
        assert [r["k"] for r in report["runs"]] == [8, 10, 12]
        for k in (8, 10, 12):
            assert (out / f"labels_k{k}.csv").exists()
            assert (out / f"map_k{k}.svg").exists()

    def test_k1_labels_everything_zero(self, demo_dataset, tmp_path):
        root, _ = demo_dataset
        out = tmp_path / "k1"
        assert run("kmeans", "--dataset", root, "--k", "1", "--restarts", "1",
                   "--out", out) == 0
        lines = (out / "labels_k1.csv").read_text().splitlines()
        assert lines[0] == "row,col,label"
        labels = {line.rsplit(",", 1)[1] for line in lines[1:]}
        assert labels == {"0"}
        assert len(lines) - 1 == 24 * 24 - 4  # masked corner omitted

    def test_byte_identical_reruns(self, demo_dataset, km_out, tmp_path):
        root, _ = demo_dataset
        out2 = tmp_path / "again"
        assert run("kmeans", "--dataset", root, "--k", "2,3", "--restarts", "3",
                   "--out", out2) == 0
        for name in ("labels_k2.csv", "labels_k3.csv", "kmeans_report.json",
                     "run_meta.json", "map_k2.svg"):
            assert (km_out / name).read_bytes() == (out2 / name).read_bytes()

    def test_bad_k_list_exits_two(self, demo_dataset, tmp_path):
        root, _ = demo_dataset
        assert run("kmeans", "--dataset", root, "--k", "a,b", "--out", tmp_path / "x") == 2


class TestMisticCommand:
    def test_outputs(self, mi_out):
        for name in ("foci.json", "cores.json", "consensus.csv", "map_consensus.svg",
                     "run_meta.json"):
            assert (mi_out / name).exists()
        for year in range(1990, 1996):
            assert (mi_out / f"zones_{year}.csv").exists()
        cores = json.loads((mi_out / "cores.json").read_text())
        assert len(cores["cores"]) == 2
        assert {c["dominance"] for c in cores["cores"]} == {"CHD", "CLD"}
        foci = json.loads((mi_out / "foci.json").read_text())
        frequent = [c for c in foci["cells"] if c["frequent"]]
        assert len(frequent) == 2

    def test_cr_radius_one_matches_cc_files(self, demo_dataset, mi_out, tmp_path):
        root, _ = demo_dataset
        out_cr = tmp_path / "cr"
        assert run("mistic", "--dataset", root, "--min-years", "3", "--mode", "cr",
                   "--radius", "1", "--out", out_cr) == 0
        names = ["cores.json", "foci.json", "consensus.csv", "map_consensus.svg"]
        names += [f"zones_{y}.csv" for y in range(1990, 1996)]
        for name in names:
            assert (mi_out / name).read_bytes() == (out_cr / name).read_bytes(), name

    def test_threshold_above_span_still_builds_cores(self, demo_dataset, tmp_path):
        root, _ = demo_dataset
        out = tmp_path / "strict"
        assert run("mistic", "--dataset", root, "--min-years", "32", "--out", out) == 0
        foci = json.loads((out / "foci.json").read_text())
        assert all(not c["frequent"] for c in foci["cells"])
        cores = json.loads((out / "cores.json").read_text())
        assert len(cores["cores"]) == 2
        assert all(c["dominance"] for c in cores["cores"])

    def test_byte_identical_reruns(self, demo_dataset, mi_out, tmp_path):
        root, _ = demo_dataset
        out2 = tmp_path / "again"
        assert run("mistic", "--dataset", root, "--min-years", "3", "--out", out2) == 0
        for name in ("foci.json", "cores.json", "consensus.csv", "run_meta.json"):
            assert (mi_out / name).read_bytes() == (out2 / name).read_bytes()

    def test_auto_orientation_on_min_variable(self, demo_dataset, mi_out, tmp_path):
        # a tmin dataset plants the same structure inverted; auto orientation
        # seeds from minima and must recover the same zones
        from gridclust.synth import write_planted_dataset

        ds = tmp_path / "tmin"
        write_planted_dataset(ds, nrows=24, ncols=24, n_years=6, b_exact=3,
                              seed=77, variable="tmin")
        out = tmp_path / "out"
        assert run("mistic", "--dataset", ds, "--min-years", "3", "--out", out) == 0
        meta = json.loads((out / "run_meta.json").read_text())
        assert meta["parameters"]["orientation"] == "minima"
        assert (out / "consensus.csv").read_bytes() == (mi_out / "consensus.csv").read_bytes()
        assert (out / "foci.json").read_bytes() == (mi_out / "foci.json").read_bytes()

    def test_constant_dataset_reports_no_foci(self, tmp_path, capsys):
        ds = tmp_path / "flat"
        write_gts(ds, manifest_doc(years=(1995,)), {1995: constant_lines(360, 4)})
        out = tmp_path / "out"
        assert run("mistic", "--dataset", ds, "--min-years", "1", "--out", out) == 0
        assert "no foci" in capsys.readouterr().out
        cores = json.loads((out / "cores.json").read_text())
        assert cores["cores"] == []
        assert (out / "consensus.csv").read_text() == "row,col,label\n"


class TestCompareCommand:
    def test_self_comparison_scores_one(self, mi_out, tmp_path):
        out = tmp_path / "self"
        assert run("compare", mi_out / "consensus.csv", mi_out / "consensus.csv",
                   "--out", out) == 0
        doc = json.loads((out / "comparison.json").read_text())
        assert doc["ari"] == 1.0

    def test_permuted_labels_score_one(self, mi_out, tmp_path):
        src = (mi_out / "consensus.csv").read_text().splitlines()
        permuted = [src[0]]
        for line in src[1:]:
            r, c, lab = line.split(",")
            permuted.append(f"{r},{c},{(int(lab) + 1) % 2}")
        pfile = tmp_path / "permuted.csv"
        pfile.write_text("\n".join(permuted) + "\n")
        out = tmp_path / "perm"
        assert run("compare", mi_out / "consensus.csv", pfile, "--out", out) == 0
        doc = json.loads((out / "comparison.json").read_text())
        assert doc["ari"] == 1.0

    def test_kmeans_vs_consensus_on_planted_data(self, demo_dataset, km_out, mi_out, tmp_path):
        root, _ = demo_dataset
        out = tmp_path / "cross"
        assert run("compare", km_out / "labels_k2.csv", mi_out / "consensus.csv",
                   "--dataset", root, "--out", out) == 0
        doc = json.loads((out / "comparison.json").read_text())
        assert doc["ari"] >= 0.8
        summary = json.loads((out / "summary.json").read_text())
        assert summary["a"]["fraction_below_1500_m"] == pytest.approx(0.5)
        assert summary["a"]["fraction_above_2000_m"] == pytest.approx(0.5)
        assert (out / "elev_slope.svg").exists()

    def test_missing_labels_file_exits_three(self, tmp_path):
        assert run("compare", tmp_path / "a.csv", tmp_path / "b.csv",
                   "--out", tmp_path / "o") == 3

    def test_elevation_without_dataset_exits_two(self, mi_out, tmp_path):
        elev = tmp_path / "elev.csv"
        elev.write_text("1.0\n")
        assert run("compare", mi_out / "consensus.csv", mi_out / "consensus.csv",
                   "--elevation", elev, "--out", tmp_path / "o") == 2


class TestRenderCommand:
    def test_renders_labels_csv(self, mi_out, tmp_path):
        out = tmp_path / "render"
        assert run("render", mi_out / "consensus.csv", "--out", out) == 0
        svg = (out / "map_consensus.svg").read_text()
        assert svg.startswith("<?xml")
        assert "<svg" in svg
