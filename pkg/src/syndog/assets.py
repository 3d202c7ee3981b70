"""Procedural asset-pack builder.

Everything a generation run needs, synthesized deterministically from one
seed: rigged mesh, shape and texture spaces, pose library, bounding-box
statistics and background images. These are stand-ins with the same file
formats as real assets, so harvested meshes, scanned textures or derived
statistics can be dropped in file-by-file.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import AssetPaths, GenerationConfig
from .pca import fit_pca, flatten_textures, save_pca
from .placement import make_synthetic_bbox_stats, save_stats_csv
from .procedural import (
    DogConfig,
    build_pose_library_degrees,
    dog_variants,
    generate_canonical_dog,
    synthesize_shape_pca,
)
from .rigging import save_obj, save_pose_library, save_rig_json

# A dog-plausible gamut for procedural coats.
_COAT_COLORS = np.array(
    [
        (0.23, 0.16, 0.10),     # dark brown
        (0.45, 0.30, 0.18),     # mid brown
        (0.76, 0.60, 0.42),     # tan
        (0.92, 0.85, 0.72),     # cream
        (0.55, 0.53, 0.50),     # grey
        (0.12, 0.10, 0.09),     # near black
        (0.93, 0.92, 0.88),     # white
        (0.55, 0.25, 0.12),     # russet
    ]
)


def _smooth_field(points, rng, n_bumps=4):
    lo, hi = points.min(axis=0), points.max(axis=0)
    span = np.linalg.norm(hi - lo)
    value = np.zeros(len(points))
    for _ in range(n_bumps):
        center = lo + rng.random(3) * (hi - lo)
        amp = rng.uniform(-1.0, 1.0)
        sigma = rng.uniform(0.2, 0.5) * span
        d2 = np.sum((points - center) ** 2, axis=1)
        value += amp * np.exp(-0.5 * d2 / sigma**2)
    return value


def make_coat_texture(mesh, d, rng):
    """One procedural coat: a smooth two-color blend over the body with a
    lightened belly, small per-face variation and a mild texel gradient."""
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    a, b = rng.choice(len(_COAT_COLORS), size=2, replace=False)
    color_a, color_b = _COAT_COLORS[a], _COAT_COLORS[b]

    t = 1.0 / (1.0 + np.exp(-3.0 * _smooth_field(centroids, rng)))
    base = color_a[None, :] + t[:, None] * (color_b - color_a)[None, :]

    y = centroids[:, 1]
    belly = np.clip((np.quantile(y, 0.45) - y) / max(np.ptp(y), 1e-9), 0.0, 1.0)
    base = base + 0.5 * belly[:, None] * (_COAT_COLORS[3] - base)

    base = base + rng.normal(0.0, 0.02, size=base.shape)

    idx = np.arange(d)
    grade = (idx[:, None, None] + idx[None, :, None] + idx[None, None, :]) / max(
        3 * (d - 1), 1
    ) - 0.5
    texture = base[:, None, None, None, :] * (1.0 + 0.06 * grade[None, :, :, :, None])
    return np.clip(texture, 0.0, 1.0)


def _bilinear_resize(arr, size):
    im = Image.fromarray(np.clip(arr * 255.0, 0, 255).astype(np.uint8), mode="RGB")
    return np.asarray(im.resize(size, Image.BILINEAR), dtype=np.float64) / 255.0


def make_background(size, rng):
    """Procedural outdoor-ish backdrop: sky and ground gradients plus
    low-frequency color noise."""
    width, height = size
    sky_top = rng.uniform(0.35, 0.8, size=3)
    sky_bot = sky_top + rng.uniform(-0.15, 0.25, size=3)
    ground_top = rng.uniform(0.2, 0.6, size=3)
    ground_bot = ground_top * rng.uniform(0.5, 0.9)
    horizon = rng.uniform(0.35, 0.65)

    v = np.linspace(0.0, 1.0, height)[:, None]
    img = np.empty((height, width, 3))
    sky_rows = v < horizon
    tsky = np.where(sky_rows, v / max(horizon, 1e-9), 0.0)
    tgnd = np.where(~sky_rows, (v - horizon) / max(1.0 - horizon, 1e-9), 0.0)
    for c in range(3):
        sky = sky_top[c] + tsky * (sky_bot[c] - sky_top[c])
        gnd = ground_top[c] + tgnd * (ground_bot[c] - ground_top[c])
        img[:, :, c] = np.where(sky_rows, sky, gnd)

    coarse = rng.random((6, 9, 3))
    img += 0.08 * (_bilinear_resize(coarse, (width, height)) - 0.5)
    return np.clip(img, 0.0, 1.0)


def build_asset_pack(
    out_dir,
    seed=0,
    face_budget=4848,
    texel_res=4,
    n_textures=12,
    n_variants=8,
    n_backgrounds=20,
    n_walk_phases=12,
    n_stats=2000,
    image_size=(455, 256),
):
    """Build the full pack under ``out_dir`` and return its paths.

    Also writes ``config.json``, a ready-to-run generation config with
    paths relative to the pack directory.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "backgrounds").mkdir(exist_ok=True)

    dog = generate_canonical_dog(DogConfig(face_budget=face_budget, seed=seed))
    save_obj(out_dir / "mesh.obj", dog.vertices, dog.faces)
    save_rig_json(out_dir / "rig.json", dog.skeleton, dog.weights)

    variants = dog_variants(
        DogConfig(face_budget=face_budget, seed=seed),
        n_variants,
        np.random.default_rng([seed, 7]),
    )
    shape_pca = synthesize_shape_pca([dog] + variants)
    save_pca(shape_pca, out_dir / "shape_pca.scpc")

    coats = np.stack(
        [
            make_coat_texture(dog, texel_res, np.random.default_rng([seed, 101, i]))
            for i in range(n_textures)
        ]
    )
    texture_pca = fit_pca(flatten_textures(coats))
    save_pca(texture_pca, out_dir / "texture_pca.scpc")

    degrees = build_pose_library_degrees(dog.skeleton, n_walk_phases=n_walk_phases)
    save_pose_library(out_dir / "pose_library.json", dog.skeleton.names, degrees)

    stats = make_synthetic_bbox_stats(n=n_stats, seed=seed)
    save_stats_csv(out_dir / "bbox_stats.csv", stats)

    for b in range(n_backgrounds):
        rng = np.random.default_rng([seed, 202, b])
        img = make_background(image_size, rng)
        arr = np.rint(img * 255.0).astype(np.uint8)
        Image.fromarray(arr, mode="RGB").save(out_dir / "backgrounds" / f"bg_{b:04d}.png")

    assets = AssetPaths(
        shape_pca="shape_pca.scpc",
        texture_pca="texture_pca.scpc",
        mesh_obj="mesh.obj",
        rig_json="rig.json",
        pose_library="pose_library.json",
        bbox_stats="bbox_stats.csv",
        background_dir="backgrounds",
    )
    config = {
        "assets": {
            "shape_pca": assets.shape_pca,
            "texture_pca": assets.texture_pca,
            "mesh_obj": assets.mesh_obj,
            "rig_json": assets.rig_json,
            "pose_library": assets.pose_library,
            "bbox_stats": assets.bbox_stats,
            "background_dir": assets.background_dir,
        },
        "count": 1,
        "seed": 0,
        "image_size": list(image_size),
    }
    with open(out_dir / "config.json", "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")

    pack = {
        "schema": 1,
        "seed": seed,
        "provenance": "procedurally generated stand-in assets (not captured data)",
        "face_count": int(dog.n_faces),
        "texel_res": texel_res,
        "n_textures": n_textures,
        "n_shape_variants": n_variants,
        "n_backgrounds": n_backgrounds,
        "n_stats": n_stats,
        "bbox_stats": "synthetic (log-normal sizes, center-biased positions)",
    }
    with open(out_dir / "pack.json", "w") as fh:
        json.dump(pack, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return GenerationConfig.from_file(out_dir / "config.json")
