"""Visual patch features, region object features and their fusion.

The visual extractor is a frozen random projection of non-overlapping
pixel patches plus sinusoidal position codes.  Region features arrive as
vectors with pixel boxes; boxes are normalised by the image size and both
parts are projected (affinely) to the model width and summed.  The encoder
input is the row-wise concatenation of the two.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .tensor import ShapeError, sinusoidal_positions


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if min(self.x_min, self.y_min, self.x_max, self.y_max) < 0:
            raise ValueError(f"negative box coordinate in {self}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"inverted box {self}")


@dataclass(frozen=True)
class RegionFeature:
    vector: np.ndarray
    box: BBox


@dataclass(frozen=True)
class FusionConfig:
    d_region: int = 16
    d_model: int = 32
    patch_size: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.d_model < 1 or self.d_region < 1 or self.patch_size < 1:
            raise ValueError(f"invalid fusion config {self}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PatchEncoder:
    """Frozen patch projection: ``patch_size**2 -> d_model``."""

    weight: np.ndarray
    patch_size: int

    @classmethod
    def create(cls, cfg: FusionConfig) -> "PatchEncoder":
        rng = np.random.default_rng([cfg.seed, 1])
        n_in = cfg.patch_size**2
        w = rng.standard_normal((n_in, cfg.d_model)) / np.sqrt(n_in)
        return cls(weight=w, patch_size=cfg.patch_size)

    def checksum(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.weight).tobytes()).hexdigest()


@dataclass
class ObjectProjection:
    """Affine maps of region vectors and normalised boxes to ``d_model``."""

    w_region: np.ndarray
    b_region: np.ndarray
    w_box: np.ndarray
    b_box: np.ndarray

    @classmethod
    def create(cls, cfg: FusionConfig) -> "ObjectProjection":
        rng = np.random.default_rng([cfg.seed, 2])
        return cls(
            w_region=rng.standard_normal((cfg.d_region, cfg.d_model)) / np.sqrt(cfg.d_region),
            b_region=np.zeros(cfg.d_model),
            w_box=rng.standard_normal((4, cfg.d_model)) / 2.0,
            b_box=np.zeros(cfg.d_model),
        )

    @property
    def d_region(self) -> int:
        return self.w_region.shape[0]

    @property
    def d_model(self) -> int:
        return self.w_region.shape[1]


def normalize_bbox(box: BBox, width: float, height: float) -> np.ndarray:
    """Divide x coordinates by ``width`` and y coordinates by ``height``."""
    if width <= 0 or height <= 0:
        raise ValueError(f"image size must be positive, got {width}x{height}")
    if box.x_max > width or box.y_max > height:
        raise ValueError(f"box {box} exceeds image bounds {width}x{height}")
    return np.array(
        [box.x_min / width, box.y_min / height, box.x_max / width, box.y_max / height]
    )


def object_embedding(regions, width, height, proj: ObjectProjection) -> np.ndarray:
    """Rows ``r_i W_r + b_r + box_i W_b + b_b`` for each region; shape ``(k, d_model)``."""
    if not regions:
        return np.zeros((0, proj.d_model))
    vectors = [np.asarray(r.vector, dtype=np.float64) for r in regions]
    dims = {v.shape for v in vectors}
    if len(dims) != 1:
        raise ShapeError(f"regions of one image have mixed dimensions {sorted(dims)}")
    R = np.stack(vectors)
    if R.shape[1] != proj.d_region:
        raise ShapeError(f"region dim {R.shape[1]} != projection input {proj.d_region}")
    B = np.stack([normalize_bbox(r.box, width, height) for r in regions])
    return (R @ proj.w_region + proj.b_region) + (B @ proj.w_box + proj.b_box)


def extract_patches(img, patch_size: int) -> np.ndarray:
    """Flatten non-overlapping patches in row-major order; partial patches are dropped."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    ny, nx = h // patch_size, w // patch_size
    if ny == 0 or nx == 0:
        raise ShapeError(f"image {w}x{h} is smaller than one {patch_size}px patch")
    crop = img[: ny * patch_size, : nx * patch_size]
    patches = crop.reshape(ny, patch_size, nx, patch_size).transpose(0, 2, 1, 3)
    return patches.reshape(ny * nx, patch_size * patch_size)


def visual_features(img, encoder: PatchEncoder, add_position: bool = True) -> np.ndarray:
    feats = extract_patches(img, encoder.patch_size) @ encoder.weight
    if add_position:
        feats = feats + sinusoidal_positions(*feats.shape)
    return feats


def fuse(visual, objects) -> np.ndarray:
    """Concatenate visual rows followed by object rows."""
    visual = np.asarray(visual, dtype=np.float64)
    objects = np.asarray(objects, dtype=np.float64)
    if objects.size == 0:
        return visual.copy()
    if visual.ndim != 2 or objects.ndim != 2 or visual.shape[1] != objects.shape[1]:
        raise ShapeError(f"cannot concatenate {visual.shape} with {objects.shape}")
    return np.concatenate([visual, objects], axis=0)


@dataclass
class ImageRegions:
    id: str
    width: int
    height: int
    regions: list[RegionFeature]


def load_regions(path) -> dict[str, ImageRegions]:
    """Read region JSONL: ``{"id", "width", "height", "regions": [{"box", "vector"}]}``."""
    out: dict[str, ImageRegions] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            try:
                regions = [
                    RegionFeature(np.asarray(r["vector"], dtype=np.float64), BBox(*r["box"]))
                    for r in rec["regions"]
                ]
                item = ImageRegions(str(rec["id"]), int(rec["width"]), int(rec["height"]), regions)
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad region record: {exc}") from exc
            if item.id in out:
                raise ValueError(f"{path}:{lineno}: duplicate id {item.id!r}")
            out[item.id] = item
    return out


def dump_regions(path, items) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for it in items:
            rec = {
                "id": it.id,
                "width": it.width,
                "height": it.height,
                "regions": [
                    {
                        "box": [r.box.x_min, r.box.y_min, r.box.x_max, r.box.y_max],
                        "vector": [float(x) for x in r.vector],
                    }
                    for r in it.regions
                ],
            }
            fh.write(json.dumps(rec) + "\n")


class FeatureExtractor:
    """Frozen image-to-encoder-input pipeline (patches plus optional regions)."""

    def __init__(self, cfg: FusionConfig):
        self.cfg = cfg
        self.patches = PatchEncoder.create(cfg)
        self.objects = ObjectProjection.create(cfg)

    def __call__(self, img, regions: ImageRegions | None = None) -> np.ndarray:
        visual = visual_features(img, self.patches)
        if regions is None:
            return visual
        h, w = np.shape(img)
        obj = object_embedding(regions.regions, regions.width or w, regions.height or h, self.objects)
        return fuse(visual, obj)
