"""End-to-end sample generation and dataset emission.

A sample is a pure function of (seed, index): coefficients, pose, root
placement, lighting and background choice all come from one per-sample
generator, so datasets are byte-identical regardless of worker count or
resume order.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import imaging
from .boxes import PixelBox
from .compositing import apply_g, composite
from .pca import load_pca, sample_coefficients, synthesize, texture_from_vector, LAYOUT_MESH, LAYOUT_TEXTURE
from .placement import (
    BBoxStats,
    DepthBounds,
    clamp_translation,
    load_stats_csv,
    sample_center,
    sample_root_depth,
)
from .procedural import mesh_from_shape_vector
from .rendering import Camera, Lighting, LightingRanges, RenderOutput, render, sample_lighting
from .rigging import (
    PoseParams,
    RiggedMesh,
    face_part_labels,
    forward_kinematics,
    apply_lbs,
    load_pose_library,
    load_rigged_mesh,
    vertex_part_labels,
)
from .transforms import quat_from_axis_angle, quat_multiply, make_transform

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = 1
BACKGROUND_SUFFIXES = (".png", ".jpg", ".jpeg")


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class AssetPaths:
    shape_pca: str
    texture_pca: str
    mesh_obj: str
    rig_json: str
    pose_library: str
    bbox_stats: str
    background_dir: str

    def resolved(self, base: Path) -> "AssetPaths":
        return AssetPaths(
            **{k: str((base / v).resolve()) for k, v in asdict(self).items()}
        )


@dataclass(frozen=True)
class GenerationConfig:
    assets: AssetPaths
    count: int = 1
    seed: int = 0
    image_size: tuple = (455, 256)
    focal: float = 500.0
    depth_bounds: DepthBounds = DepthBounds()
    lighting: LightingRanges = LightingRanges()
    shape_scale: float = 1.0
    texture_scale: float = 1.0
    tilt_max_deg: float = 15.0      # upright bound on root pitch and roll
    max_attempts: int = 10

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sample count must be at least 1")
        width, height = self.image_size
        if width < 1 or height < 1:
            raise ValueError("image size must be positive")
        object.__setattr__(self, "image_size", (int(width), int(height)))

    def to_json_dict(self):
        return {
            "assets": asdict(self.assets),
            "count": self.count,
            "seed": self.seed,
            "image_size": list(self.image_size),
            "focal": self.focal,
            "depth_bounds": {"near": self.depth_bounds.near, "far": self.depth_bounds.far},
            "lighting": {
                "ambient": list(self.lighting.ambient),
                "directional": list(self.lighting.directional),
            },
            "shape_scale": self.shape_scale,
            "texture_scale": self.texture_scale,
            "tilt_max_deg": self.tilt_max_deg,
            "max_attempts": self.max_attempts,
        }

    @classmethod
    def from_dict(cls, doc, base_dir=".") -> "GenerationConfig":
        assets = AssetPaths(**doc["assets"]).resolved(Path(base_dir))
        depth = doc.get("depth_bounds", {})
        lighting = doc.get("lighting", {})
        return cls(
            assets=assets,
            count=int(doc.get("count", 1)),
            seed=int(doc.get("seed", 0)),
            image_size=tuple(doc.get("image_size", (455, 256))),
            focal=float(doc.get("focal", 500.0)),
            depth_bounds=DepthBounds(
                near=float(depth.get("near", 1.5)), far=float(depth.get("far", 8.0))
            ),
            lighting=LightingRanges(
                ambient=tuple(lighting.get("ambient", (0.3, 0.7))),
                directional=tuple(lighting.get("directional", (0.2, 0.8))),
            ),
            shape_scale=float(doc.get("shape_scale", 1.0)),
            texture_scale=float(doc.get("texture_scale", 1.0)),
            tilt_max_deg=float(doc.get("tilt_max_deg", 15.0)),
            max_attempts=int(doc.get("max_attempts", 10)),
        )

    @classmethod
    def from_file(cls, path) -> "GenerationConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            doc = tomllib.loads(text)
        else:
            doc = json.loads(text)
        return cls.from_dict(doc, base_dir=path.parent)


@dataclass
class Assets:
    """Loaded asset bundle plus derived, render-ready pieces."""

    mesh: RiggedMesh
    shape_pca: object
    texture_pca: object
    pose_library: object
    stats: BBoxStats
    backgrounds: list
    camera: Camera
    face_parts: np.ndarray

    @classmethod
    def load(cls, config: GenerationConfig) -> "Assets":
        paths = config.assets
        mesh = load_rigged_mesh(paths.mesh_obj, paths.rig_json)
        shape_pca = load_pca(paths.shape_pca)
        texture_pca = load_pca(paths.texture_pca)
        if shape_pca.layout != LAYOUT_MESH or shape_pca.dims != (mesh.n_vertices,):
            raise ValueError("shape model does not match the mesh vertex count")
        if texture_pca.layout != LAYOUT_TEXTURE or texture_pca.dims[0] != mesh.n_faces:
            raise ValueError("texture model does not match the mesh face count")
        library = load_pose_library(paths.pose_library)
        if tuple(library.joint_names) != tuple(mesh.skeleton.names):
            raise ValueError("pose library joints do not match the skeleton")
        stats = load_stats_csv(paths.bbox_stats)
        backgrounds = sorted(
            p
            for p in Path(paths.background_dir).iterdir()
            if p.suffix.lower() in BACKGROUND_SUFFIXES
        )
        if not backgrounds:
            raise ValueError(f"no background images in {paths.background_dir}")
        # Camera sits at the rest body-center height so an unrotated dog
        # projects near the vertical middle of the frame.
        look_height = 0.5 * (mesh.vertices[:, 1].min() + mesh.vertices[:, 1].max())
        extrinsic = make_transform(translation=(0.0, -look_height, 0.0))
        camera = Camera(focal=config.focal, size=config.image_size, extrinsic=extrinsic)
        face_parts = face_part_labels(mesh.faces, vertex_part_labels(mesh.weights))
        return cls(
            mesh=mesh,
            shape_pca=shape_pca,
            texture_pca=texture_pca,
            pose_library=library,
            stats=stats,
            backgrounds=backgrounds,
            camera=camera,
            face_parts=face_parts,
        )


@dataclass
class DataSample:
    index: int
    rgb: np.ndarray                 # composited, float, pre-quantization
    mask: np.ndarray
    part_map: np.ndarray
    depth: np.ndarray
    joints_2d: np.ndarray
    joints_visible: np.ndarray
    joints_3d: np.ndarray
    pose: PoseParams
    shape_coeffs: np.ndarray
    texture_coeffs: np.ndarray
    background_id: str
    bbox: PixelBox
    translation: tuple
    d_root: float
    cp: tuple
    attempts: int
    render_: RenderOutput | None = None     # post-G, pre-composite
    background_: np.ndarray | None = None

    @property
    def sample_id(self):
        return f"{self.index:06d}"


def sample_root_rotation(rng, tilt_max_deg):
    """Uniform yaw, with pitch and roll uniform in the upright bound."""
    yaw = rng.uniform(0.0, 2.0 * np.pi)
    pitch = np.deg2rad(rng.uniform(-tilt_max_deg, tilt_max_deg))
    roll = np.deg2rad(rng.uniform(-tilt_max_deg, tilt_max_deg))
    q = quat_from_axis_angle((0.0, 1.0, 0.0), yaw)
    q = quat_multiply(q, quat_from_axis_angle((1.0, 0.0, 0.0), pitch))
    return quat_multiply(q, quat_from_axis_angle((0.0, 0.0, 1.0), roll))


def generate_sample(
    config: GenerationConfig, assets: Assets, index, keep_intermediates=False
) -> DataSample:
    """Generate one sample, deterministically from (config.seed, index).

    Draw order per attempt: shape coeffs, texture coeffs, pose, root
    rotation, root depth, lighting, target center, background. An attempt
    whose render is empty (subject fully clipped) is discarded and retried
    up to ``config.max_attempts`` times.
    """
    rng = np.random.default_rng([config.seed, index])
    width, height = config.image_size
    tpl = assets.mesh

    for attempt in range(1, config.max_attempts + 1):
        shape_coeffs = sample_coefficients(assets.shape_pca, rng, config.shape_scale)
        texture_coeffs = sample_coefficients(assets.texture_pca, rng, config.texture_scale)
        texture_vec = synthesize(assets.texture_pca, texture_coeffs)
        f, d = assets.texture_pca.dims
        texture = texture_from_vector(texture_vec, f, d)

        pose_quats = assets.pose_library.sample(rng)
        root_rotation = sample_root_rotation(rng, config.tilt_max_deg)
        d_root = sample_root_depth(assets.stats, config.depth_bounds, rng)
        lighting = sample_lighting(rng, config.lighting)

        try:
            mesh = mesh_from_shape_vector(synthesize(assets.shape_pca, shape_coeffs), tpl)
        except ValueError:
            continue    # degenerate synthesized shape; redraw

        pose = PoseParams(pose_quats, root_rotation, d_root)
        globals_, joints_3d = forward_kinematics(mesh.skeleton, pose)
        posed = apply_lbs(mesh, globals_)

        rendered = render(
            posed,
            mesh.faces,
            texture,
            assets.camera,
            lighting,
            face_parts=assets.face_parts,
            joints_3d=joints_3d,
        )
        if rendered.bbox is None:
            continue    # subject fully outside the frame; redraw

        box_size = rendered.bbox.area / float(width * height)
        cp = sample_center(assets.stats, min(box_size, 1.0), rng)
        translation = clamp_translation(rendered.bbox, cp, (width, height))
        shifted = apply_g(rendered, translation)
        if shifted.bbox is None:
            continue

        bg_path = assets.backgrounds[int(rng.integers(len(assets.backgrounds)))]
        background = imaging.load_background(bg_path, (width, height))
        out_rgb = composite(shifted, background)

        return DataSample(
            index=index,
            rgb=out_rgb,
            mask=shifted.mask,
            part_map=shifted.part_map,
            depth=shifted.depth,
            joints_2d=shifted.joints_2d,
            joints_visible=shifted.joints_visible,
            joints_3d=joints_3d,
            pose=pose,
            shape_coeffs=shape_coeffs,
            texture_coeffs=texture_coeffs,
            background_id=bg_path.name,
            bbox=shifted.bbox,
            translation=translation,
            d_root=d_root,
            cp=(float(cp[0]), float(cp[1])),
            attempts=attempt,
            render_=shifted if keep_intermediates else None,
            background_=background if keep_intermediates else None,
        )

    raise GenerationError(
        f"sample {index}: no usable render after {config.max_attempts} attempts"
    )


# -- on-disk layout ----------------------------------------------------------

def sample_record(sample: DataSample):
    """JSON-safe annotation record for one sample."""
    return {
        "id": sample.sample_id,
        "index": sample.index,
        "shape_coeffs": [float(x) for x in sample.shape_coeffs],
        "texture_coeffs": [float(x) for x in sample.texture_coeffs],
        "pose": {
            "joint_rotations_wxyz": sample.pose.joint_rotations.tolist(),
            "root_rotation_wxyz": sample.pose.root_rotation.tolist(),
            "root_depth": sample.pose.root_depth,
        },
        "joints_2d": sample.joints_2d.tolist(),
        "joints_visible": sample.joints_visible.astype(bool).tolist(),
        "joints_3d": sample.joints_3d.tolist(),
        "bbox": [sample.bbox.x0, sample.bbox.y0, sample.bbox.x1, sample.bbox.y1],
        "translation": list(sample.translation),
        "cp": list(sample.cp),
        "d_root": sample.d_root,
        "background": sample.background_id,
        "attempts": sample.attempts,
    }


def _sample_paths(out_dir: Path, sample_id: str):
    return {
        "rgb": out_dir / "rgb" / f"{sample_id}.png",
        "mask": out_dir / "mask" / f"{sample_id}.png",
        "part": out_dir / "part" / f"{sample_id}.png",
        "ann": out_dir / "ann" / f"{sample_id}.json",
    }


def write_sample(sample: DataSample, out_dir):
    """Write the four per-sample files; the annotation goes last so its
    presence marks the sample complete."""
    paths = _sample_paths(Path(out_dir), sample.sample_id)
    imaging.save_png_rgb(paths["rgb"], sample.rgb)
    imaging.save_png_mask(paths["mask"], sample.mask)
    imaging.save_png_part_map(paths["part"], sample.part_map)
    with open(paths["ann"], "w") as fh:
        json.dump(sample_record(sample), fh, sort_keys=True)
        fh.write("\n")


def is_sample_complete(out_dir, index):
    paths = _sample_paths(Path(out_dir), f"{index:06d}")
    return all(p.exists() for p in paths.values())


_WORKER_STATE = {}


def _worker_generate(config: GenerationConfig, out_dir, index):
    key = config.assets
    if _WORKER_STATE.get("key") != key:
        _WORKER_STATE["key"] = key
        _WORKER_STATE["assets"] = Assets.load(config)
    sample = generate_sample(config, _WORKER_STATE["assets"], index)
    write_sample(sample, out_dir)
    return index


def generate_dataset(config: GenerationConfig, out_dir, workers=1, assets=None):
    """Generate the dataset on disk and return the manifest dict.

    Already-complete samples are skipped, so interrupted runs resume and
    regenerate only what is missing (determinism makes the result
    byte-identical either way). On failure a partial manifest flagged
    ``"complete": false`` is flushed before the error propagates.
    """
    out_dir = Path(out_dir)
    for sub in ("rgb", "mask", "part", "ann"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    pending = [i for i in range(config.count) if not is_sample_complete(out_dir, i)]
    log.info("generating %d of %d samples into %s", len(pending), config.count, out_dir)

    failure = None
    try:
        if workers <= 1:
            if assets is None:
                assets = Assets.load(config)
            for index in pending:
                write_sample(generate_sample(config, assets, index), out_dir)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for _ in pool.map(
                    _worker_generate,
                    [config] * len(pending),
                    [out_dir] * len(pending),
                    pending,
                    chunksize=4,
                ):
                    pass
    except BaseException as exc:
        failure = exc

    samples = []
    for index in range(config.count):
        ann = _sample_paths(out_dir, f"{index:06d}")["ann"]
        if ann.exists():
            with open(ann) as fh:
                samples.append(json.load(fh))

    manifest = {
        "schema_version": MANIFEST_SCHEMA,
        "complete": failure is None and len(samples) == config.count,
        "count": config.count,
        "seed": config.seed,
        "config": config.to_json_dict(),
        "samples": samples,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")

    if failure is not None:
        raise failure
    return manifest
