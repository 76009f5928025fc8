"""Command-line interface.

Model tooling (training, file-to-file generation, evaluation) runs locally;
job and scene commands are thin clients of a running service.
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from .scene.io import (
    dump_json,
    graph_from_doc,
    layout_from_doc,
    layout_to_doc,
    load_json,
    load_occupancy,
    save_occupancy,
)


@click.group()
def main():
    """Driving-scene generation toolkit."""


# --------------------------------------------------------------------------
# local generation tools


@main.command("layout")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=7, show_default=True)
@click.option("--steps", default=100, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path())
def layout_cmd(graph_path, ckpt_path, seed, steps, output):
    """Sample a box/lane layout for a scene graph."""
    from .layout import load_layout_model, sample_layout
    from .scene import desk_world

    model, schedule = load_layout_model(ckpt_path)
    graph = graph_from_doc(load_json(graph_path))
    boxes, lanes, _ = sample_layout(
        graph, model, schedule, desk_world(), seed=seed, steps=steps
    )
    dump_json(layout_to_doc(boxes, lanes), output)
    click.echo(f"wrote {len(boxes)} boxes, {len(lanes)} lanes -> {output}")


@main.group("occ-vae")
def occ_vae():
    """Train and run the occupancy autoencoder."""


@occ_vae.command("train")
@click.option("--scenes", default=48, show_default=True)
@click.option("--corpus-seed", default=1, show_default=True)
@click.option("--steps", default=1500, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path())
def occ_vae_train(scenes, corpus_seed, steps, seed, output):
    from .toydata import generate_toy_corpus
    from .triplane import VaeConfig, VaeTrainConfig, save_vae, train_vae

    corpus = generate_toy_corpus(scenes, seed=corpus_seed)
    grids = [s.occupancy for s in corpus]
    split = max(1, int(len(grids) * 0.85))
    model, history = train_vae(
        grids[:split], grids[split:], VaeConfig(), VaeTrainConfig(steps=steps, seed=seed)
    )
    save_vae(model, output)
    final = history[-1]
    click.echo(
        f"saved {output} (val IoU {final.get('val_iou', float('nan')):.3f}, "
        f"mIoU {final.get('val_miou', float('nan')):.3f})"
    )


@occ_vae.command("encode")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--occ", "occ_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
def occ_vae_encode(ckpt, occ_path, output):
    from .triplane import load_vae

    model = load_vae(ckpt)
    grid = load_occupancy(occ_path)
    model.encode_grid(grid).save(output)
    click.echo(f"wrote triplane -> {output}")


@occ_vae.command("decode")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--triplane", "tri_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
def occ_vae_decode(ckpt, tri_path, output):
    from .scene import desk_world
    from .triplane import Triplane, load_vae

    model = load_vae(ckpt)
    h = Triplane.load(tri_path)
    grid = model.decode_triplane(h, desk_world())
    save_occupancy(grid, output)
    click.echo(f"wrote occupancy -> {output}")


@occ_vae.command("eval")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--occ", "occ_path", required=True, type=click.Path(exists=True))
def occ_vae_eval(ckpt, occ_path):
    from .triplane import load_vae, reconstruct_metrics

    model = load_vae(ckpt)
    grid = load_occupancy(occ_path)
    pred = model.decode_triplane(model.encode_grid(grid), grid.world)
    iou, miou = reconstruct_metrics(pred, grid)
    click.echo(f"IoU {iou:.4f}  mIoU {miou:.4f}")


@main.command("gen-occ")
@click.option("--layout", "layout_path", required=True, type=click.Path(exists=True))
@click.option("--desc", "desc_path", type=click.Path(exists=True))
@click.option("--vae", "vae_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=7, show_default=True)
@click.option("--steps", default=20, show_default=True)
@click.option("--cfg", default=1.2, show_default=True)
@click.option("-o", "--output", default="generated.occ", show_default=True)
def gen_occ(layout_path, desc_path, vae_path, model_path, seed, steps, cfg, output):
    """Generate occupancy from a layout (and optional description)."""
    from .describe.types import description_from_doc
    from .occdiff import RawConditions, load_occ_model, sample_occupancy_latents
    from .scene import desk_world
    from .triplane import load_vae

    vae = load_vae(vae_path)
    model, schedule, scale, dims = load_occ_model(model_path)
    boxes, lanes = layout_from_doc(load_json(layout_path))
    description = (
        description_from_doc(load_json(desc_path)) if desc_path else None
    )
    world = desk_world()
    bundle = model.conditions(
        RawConditions(world=world, boxes=boxes, lanes=lanes, description=description)
    )
    h = sample_occupancy_latents(
        model, bundle, schedule, scale, dims, seed=seed, steps=steps, cfg_scale=cfg
    )
    occ = vae.decode_triplane(h, world)
    save_occupancy(occ, output)
    h.save(Path(output).with_suffix(".triplane"))
    click.echo(f"wrote {output}")


@main.command("outpaint")
@click.option("--ref", "ref_path", required=True, type=click.Path(exists=True),
              help="reference .occ file")
@click.option("--dir", "direction", required=True,
              type=click.Choice(["+x", "-x", "+y", "-y"]))
@click.option("--overlap", default=0.5, show_default=True)
@click.option("--vae", "vae_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=7, show_default=True)
@click.option("-o", "--output", default="extended.occ", show_default=True)
def outpaint_cmd(ref_path, direction, overlap, vae_path, model_path, seed, output):
    """Extend a scene's occupancy in one direction."""
    from .occdiff import (
        RawConditions,
        load_occ_model,
        outpaint_triplane,
        plan_chunk_masks,
        shift_reference,
    )
    from .triplane import load_vae

    vae = load_vae(vae_path)
    model, schedule, scale, (x_h, y_h, z_h, _) = load_occ_model(model_path)
    grid = load_occupancy(ref_path)
    h_ref = vae.encode_grid(grid)
    mask = plan_chunk_masks(direction, overlap, x_h, y_h, z_h)
    reference = shift_reference(h_ref, direction, overlap)
    bundle = model.conditions(RawConditions(world=grid.world))
    h_new = outpaint_triplane(
        model, reference, mask, bundle, schedule, scale, seed=seed
    )
    occ = vae.decode_triplane(h_new, grid.world)
    save_occupancy(occ, output)
    click.echo(f"wrote {output}")


@main.command("gen-views")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True),
              help=".occ file (layout JSON picked up from the sidecar name)")
@click.option("--layout", "layout_path", type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=7, show_default=True)
@click.option("--steps", default=20, show_default=True)
@click.option("--cfg", default=1.2, show_default=True)
@click.option("-o", "--output", default="views", show_default=True)
def gen_views(scene_path, layout_path, model_path, seed, steps, cfg, output):
    """Render geometry-conditioned camera views for an occupancy scene."""
    from .imgdiff import load_image_model, sample_views
    from .pipeline.stages import _rendered_scene, write_views
    from .render import rasterize, voxels_to_gaussians
    from .scene import project_layout_to_perspective
    from .toydata import camera_rig

    model, schedule = load_image_model(model_path)
    occ = load_occupancy(scene_path)
    boxes, lanes = ([], [])
    if layout_path:
        boxes, lanes = layout_from_doc(load_json(layout_path))
    cams = camera_rig()
    prims = voxels_to_gaussians(occ)
    semantics, depths, persps = [], [], []
    for cam in cams:
        semantic, depth = rasterize(prims, cam, class_count=occ.world.class_count)
        pm = project_layout_to_perspective(boxes, lanes, cam, class_ids=(3, 6))
        semantics.append(semantic)
        depths.append(depth)
        persps.append(np.moveaxis(pm.data, -1, 0))
    rendered = _rendered_scene(
        occ, boxes, lanes, None, np.stack(semantics), np.stack(depths),
        np.stack(persps).astype(np.float32), cams,
    )
    rendered.scene.description = _minimal_description()
    batch = sample_views(model, rendered, schedule, seed=seed, steps=steps, cfg_scale=cfg)
    write_views(batch, Path(output))
    click.echo(f"wrote {len(batch.images)} views -> {output}/")


def _minimal_description():
    from .describe.types import EntityRef, SceneDescription, SceneStyle

    return SceneDescription(
        style=SceneStyle("daytime", "sunny", "suburban", "straight road"),
        foreground=(),
        background=(EntityRef("road", "asphalt"),),
        textual_layout=(),
        abstract="",
    )


@main.command("eval")
@click.option("--real", "real_dir", required=True, type=click.Path(exists=True))
@click.option("--gen", "gen_dir", required=True, type=click.Path(exists=True))
@click.option("--metrics", default="fid,kid,is,prf", show_default=True)
@click.option("--extractor", "extractor_path", required=True, type=click.Path(exists=True))
@click.option("--report", "report_path", default="report.json", show_default=True)
def eval_cmd(real_dir, gen_dir, metrics, extractor_path, report_path):
    """Generative metrics between two sample directories (.occ or .png)."""
    from .metrics import compute_report, load_extractor, load_samples
    from .scene.world import DESK_PALETTE

    extractor = load_extractor(extractor_path)
    real_items, kind = load_samples(real_dir)
    gen_items, kind2 = load_samples(gen_dir)
    if kind != kind2:
        raise click.ClickException(f"sample kinds differ: {kind} vs {kind2}")
    report = compute_report(
        real_items, gen_items, kind, extractor,
        metrics=tuple(metrics.split(",")), palette=DESK_PALETTE,
    )
    dump_json(report.to_doc(), report_path)
    click.echo(json.dumps(report.to_doc(), indent=2))


# --------------------------------------------------------------------------
# training


@main.group("train")
def train():
    """Train the desk-scale models into a checkpoint directory."""


@train.command("all")
@click.option("--out", "out_dir", default="checkpoints", show_default=True)
@click.option("--scenes", default=48, show_default=True)
@click.option("--corpus-seed", default=1, show_default=True)
@click.option("--quick", is_flag=True, help="tiny step counts for smoke testing")
def train_all(out_dir, scenes, corpus_seed, quick):
    from .pipeline.training import train_all_models

    paths = train_all_models(
        Path(out_dir), corpus_size=scenes, corpus_seed=corpus_seed, quick=quick
    )
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


# --------------------------------------------------------------------------
# service and thin client


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True))
def serve_cmd(config_path):
    """Start the HTTP service (fails fast on missing checkpoints)."""
    from .pipeline import AppConfig, serve

    serve(AppConfig.load(config_path))


@main.group("jobs")
def jobs():
    """Submit and poll jobs on a running service."""


def _client(url):
    from .pipeline.client import ServiceClient

    return ServiceClient(url)


@jobs.command("submit")
@click.option("--url", default="http://127.0.0.1:8000", show_default=True)
@click.option("--kind", type=click.Choice(["generate", "extend", "edit"]), required=True)
@click.option("--payload", required=True, help="JSON payload")
@click.option("--wait/--no-wait", default=True, show_default=True)
def jobs_submit(url, kind, payload, wait):
    client = _client(url)
    job_id = client.submit_job(kind, json.loads(payload))
    click.echo(job_id)
    if wait:
        doc = client.wait(job_id)
        click.echo(json.dumps(doc, indent=2))


@jobs.command("status")
@click.option("--url", default="http://127.0.0.1:8000", show_default=True)
@click.argument("job_id")
def jobs_status(url, job_id):
    click.echo(json.dumps(_client(url).job(job_id), indent=2))


@main.group("scenes")
def scenes():
    """Inspect scenes on a running service."""


@scenes.command("list")
@click.option("--url", default="http://127.0.0.1:8000", show_default=True)
def scenes_list(url):
    for scene_id in _client(url).scenes():
        click.echo(scene_id)


@scenes.command("get")
@click.option("--url", default="http://127.0.0.1:8000", show_default=True)
@click.argument("scene_id")
def scenes_get(url, scene_id):
    click.echo(json.dumps(_client(url).scene(scene_id), indent=2))


@scenes.command("fetch")
@click.option("--url", default="http://127.0.0.1:8000", show_default=True)
@click.argument("scene_id")
@click.argument("artifact")
@click.option("-o", "--output", required=True, type=click.Path())
def scenes_fetch(url, scene_id, artifact, output):
    path = _client(url).download_artifact(scene_id, artifact, Path(output))
    click.echo(str(path))


if __name__ == "__main__":
    main()
