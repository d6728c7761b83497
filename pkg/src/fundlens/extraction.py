"""Per-image extraction of the full image-detail feature block.

One call produces the color (8), composition (7), and figure-ground (3)
features plus the face count; annotation-based scene features join the block
separately because they go through the provider cache.  Failures inside a
single feature family degrade to missing values, never abort the image.
"""

from __future__ import annotations

from dataclasses import dataclass

from .imaging import color as colormod
from .imaging import composition as compmod
from .imaging import figure_ground as fgmod
from .imaging.core import ImageBuffer, ensure_rgb, resize_bilinear
from .imaging.faces import CascadeClassifier, detect_faces
from .imaging.quality import QualityModel, quality_features

IMAGE_DETAIL_CATEGORIES = {
    "brightness": "color",
    "saturation": "color",
    "colorfulness": "color",
    "contrast": "color",
    "warm_hue": "color",
    "clarity": "color",
    "blur": "color",
    "quality": "color",
    "diagonal_dominance": "composition",
    "rule_of_thirds": "composition",
    "balance_vertical": "composition",
    "balance_horizontal": "composition",
    "color_balance_vertical": "composition",
    "color_balance_horizontal": "composition",
    "n_segments": "composition",
    "fg_size_difference": "figure_ground",
    "fg_color_difference": "figure_ground",
    "fg_texture_difference": "figure_ground",
    "n_faces": "scene",
}


@dataclass(frozen=True)
class ExtractionSettings:
    max_side: int = 256
    slic_k: int = 100
    slic_compactness: float = 10.0
    enable_color: bool = True
    enable_composition: bool = True
    enable_figure_ground: bool = True
    enable_faces: bool = True


def scene_columns(provider_names) -> dict[str, str]:
    cols = {}
    for name in provider_names:
        cols[f"n_concepts_{name}"] = "scene"
        cols[f"max_confidence_{name}"] = "scene"
    return cols


def extract_image_details(
    img: ImageBuffer,
    settings: ExtractionSettings,
    quality_model: QualityModel | None = None,
    cascade: CascadeClassifier | None = None,
) -> dict[str, float | None]:
    """All image-detail features for one image; None marks a missing value."""
    img = resize_bilinear(ensure_rgb(img), settings.max_side)
    out: dict[str, float | None] = {}

    if settings.enable_color:
        out["brightness"] = colormod.brightness(img)
        out["saturation"] = colormod.saturation(img)
        out["colorfulness"] = colormod.colorfulness(img)
        out["contrast"] = colormod.contrast(img)
        out["warm_hue"] = colormod.warm_hue(img)
        out["clarity"] = colormod.clarity(img)
        out["blur"] = colormod.blur_metric(img)
        feats = quality_features(img)
        if feats is None or quality_model is None:
            out["quality"] = None
        else:
            out["quality"] = quality_model.score(feats)

    if settings.enable_composition:
        sal = compmod.saliency_map(img)
        out["diagonal_dominance"] = compmod.diagonal_dominance(sal)
        out["rule_of_thirds"] = compmod.rule_of_thirds(sal)
        out["balance_vertical"] = compmod.physical_balance(sal, "vertical")
        out["balance_horizontal"] = compmod.physical_balance(sal, "horizontal")
        out["color_balance_vertical"] = compmod.color_balance(
            img, "vertical", k=settings.slic_k, compactness=settings.slic_compactness
        )
        out["color_balance_horizontal"] = compmod.color_balance(
            img, "horizontal", k=settings.slic_k, compactness=settings.slic_compactness
        )
        out["n_segments"] = float(compmod.num_segments(img))

    if settings.enable_figure_ground:
        mask = fgmod.segment_figure_ground(img)
        out["fg_size_difference"] = fgmod.size_difference(mask)
        out["fg_color_difference"] = fgmod.color_difference(img, mask)
        out["fg_texture_difference"] = fgmod.texture_difference(img, mask)

    if settings.enable_faces and cascade is not None:
        out["n_faces"] = float(detect_faces(img, cascade).count)

    return out
