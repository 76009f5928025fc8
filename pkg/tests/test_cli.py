import json

import numpy as np
import pytest
from click.testing import CliRunner

from xscene.cli import main
from xscene.scene import desk_world
from xscene.scene.io import (
    dump_json,
    graph_to_doc,
    load_json,
    load_occupancy,
    save_occupancy,
)
from xscene.toydata import generate_toy_scene, relation_layout_sample


@pytest.fixture()
def runner():
    return CliRunner()


class TestHelpSurfaces:
    def test_top_level_lists_documented_commands(self, runner):
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        for command in ("layout", "occ-vae", "gen-occ", "outpaint", "gen-views",
                        "eval", "serve", "jobs", "scenes", "train"):
            assert command in result.output

    def test_occ_vae_subcommands(self, runner):
        result = runner.invoke(main, ["occ-vae", "--help"])
        assert result.exit_code == 0
        for sub in ("train", "encode", "decode", "eval"):
            assert sub in result.output


@pytest.mark.slow
class TestFileToFileTools:
    def test_layout_command(self, runner, tmp_path, desk_layout_model):
        from xscene.layout import save_layout_model

        model, schedule = desk_layout_model
        ckpt = tmp_path / "layout.ckpt"
        save_layout_model(model, schedule, ckpt)
        graph, _, _ = relation_layout_sample(5, "front_of")
        graph_path = tmp_path / "graph.json"
        dump_json(graph_to_doc(graph), graph_path)
        out = tmp_path / "layout.json"
        result = runner.invoke(
            main,
            ["layout", "--graph", str(graph_path), "--ckpt", str(ckpt),
             "--seed", "7", "--steps", "100", "-o", str(out)],
        )
        assert result.exit_code == 0, result.output
        doc = load_json(out)
        assert doc["schema"] == "layout/1"
        assert len(doc["boxes"]) == 2

    def test_occ_vae_encode_decode_eval(self, runner, tmp_path, desk_vae, toy_corpus):
        from xscene.triplane import save_vae

        vae, _ = desk_vae
        ckpt = tmp_path / "vae.ckpt"
        save_vae(vae, ckpt)
        occ_path = tmp_path / "scene.occ"
        save_occupancy(toy_corpus[0].occupancy, occ_path)

        tri_dir = tmp_path / "triplane"
        result = runner.invoke(
            main, ["occ-vae", "encode", "--ckpt", str(ckpt), "--occ", str(occ_path),
                   "-o", str(tri_dir)],
        )
        assert result.exit_code == 0, result.output
        out_occ = tmp_path / "decoded.occ"
        result = runner.invoke(
            main, ["occ-vae", "decode", "--ckpt", str(ckpt), "--triplane", str(tri_dir),
                   "-o", str(out_occ)],
        )
        assert result.exit_code == 0, result.output
        decoded = load_occupancy(out_occ)
        assert decoded.labels.shape == (64, 64, 8)
        result = runner.invoke(
            main, ["occ-vae", "eval", "--ckpt", str(ckpt), "--occ", str(occ_path)]
        )
        assert result.exit_code == 0
        assert "mIoU" in result.output

    def test_eval_command_writes_report(self, runner, tmp_path, desk_extractors, toy_corpus):
        from xscene.metrics import save_extractor

        vox_extractor, _ = desk_extractors
        ckpt = tmp_path / "extractor.ckpt"
        save_extractor(vox_extractor, ckpt)
        real_dir = tmp_path / "real"
        gen_dir = tmp_path / "gen"
        real_dir.mkdir()
        gen_dir.mkdir()
        for i, scene in enumerate(toy_corpus[:6]):
            save_occupancy(scene.occupancy, real_dir / f"{i}.occ")
        for i, scene in enumerate(toy_corpus[6:12]):
            save_occupancy(scene.occupancy, gen_dir / f"{i}.occ")
        report_path = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["eval", "--real", str(real_dir), "--gen", str(gen_dir),
             "--extractor", str(ckpt), "--report", str(report_path),
             "--metrics", "fid,kid,is,prf"],
        )
        assert result.exit_code == 0, result.output
        doc = load_json(report_path)
        assert doc["schema"] == "metric_report/1"
        assert doc["fid"] >= 0
        assert 1.0 <= doc["inception"]
        assert 0.0 <= doc["precision"] <= 1.0
