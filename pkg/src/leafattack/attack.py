"""Exhaustive placement search for leaf-occlusion adversarial examples.

A black-box attack: the classifier is only invoked, never introspected. Every
combination of patch area ratio, rotation angle, and grid position that keeps
the transformed leaf fully on the sign face is composited and classified; the
winner is the misclassification with the highest confidence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import Classify, Probabilities
from .edgeops import EdgeParams
from .errors import PatchError
from .raster import BinaryMask, LeafAsset, RasterImage, SignInstance, composite, rotate, scale, scale_mask

DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5)
DEFAULT_ANGLES = (0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0)

ATTACK_SUMMARY_HEADER = ("Adversarial Image", "Leaf Type", "Predicted Label", "Confidence Score (%)", "Attack Success")


@dataclass(frozen=True)
class AttackConfig:
    """Search-space description plus the classifier under attack.

    Ratios and angles are deduplicated and sorted ascending; candidates are
    enumerated in (ratio, angle, y, x) order, which also breaks ties.
    """

    classify: Classify
    patch_ratios: tuple = DEFAULT_RATIOS
    angles_deg: tuple = DEFAULT_ANGLES
    grid_stride: int = 4
    bbox_containment: bool = False
    seed: int = 0

    def __post_init__(self):
        ratios = tuple(sorted({float(r) for r in self.patch_ratios}))
        angles = tuple(sorted({float(a) for a in self.angles_deg}))
        if not ratios or any(not 0 < r <= 1 for r in ratios):
            raise ValueError(f"patch ratios must lie in (0, 1], got {self.patch_ratios}")
        if not angles or any(not 0 <= a < 360 for a in angles):
            raise ValueError(f"angles must lie in [0, 360), got {self.angles_deg}")
        if self.grid_stride < 1:
            raise ValueError(f"grid stride must be >= 1, got {self.grid_stride}")
        object.__setattr__(self, "patch_ratios", ratios)
        object.__setattr__(self, "angles_deg", angles)

    def params_dict(self) -> dict:
        return {
            "patch_ratios": list(self.patch_ratios),
            "angles_deg": list(self.angles_deg),
            "grid_stride": self.grid_stride,
            "bbox_containment": self.bbox_containment,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class PlacementCandidate:
    """One placement: top-left corner plus the transform that produced the patch."""

    x: int
    y: int
    patch_ratio: float
    angle_deg: float
    patch_w: int
    patch_h: int


@dataclass(frozen=True)
class AttackOutcome:
    """Classification result for one composited candidate."""

    candidate: PlacementCandidate
    predicted_label: int
    confidence_percent: float
    success: bool


@dataclass(frozen=True)
class AttackReport:
    """Everything a run produced: the best outcome plus a full parameter echo."""

    sign_name: str
    leaf_species: str
    true_label: int
    best: AttackOutcome | None
    best_is_fallback: bool
    total_candidates: int
    successful_candidates: int
    attack_params: dict
    edge_params: dict
    class_labels: tuple | None = None
    candidates: tuple | None = field(default=None, repr=False)

    def label_text(self, index: int) -> str:
        if self.class_labels is not None and 0 <= index < len(self.class_labels):
            return self.class_labels[index]
        return f"class {index}"

    def to_json_dict(self) -> dict:
        def outcome_dict(outcome: AttackOutcome) -> dict:
            cand = outcome.candidate
            return {
                "x": cand.x,
                "y": cand.y,
                "patch_ratio": cand.patch_ratio,
                "angle_deg": cand.angle_deg,
                "patch_w": cand.patch_w,
                "patch_h": cand.patch_h,
                "predicted_label": outcome.predicted_label,
                "predicted_label_text": self.label_text(outcome.predicted_label),
                "confidence_percent": outcome.confidence_percent,
                "success": outcome.success,
            }

        doc = {
            "sign": self.sign_name,
            "leaf_species": self.leaf_species,
            "true_label": self.true_label,
            "true_label_text": self.label_text(self.true_label),
            "best": outcome_dict(self.best) if self.best else None,
            "best_is_fallback": self.best_is_fallback,
            "total_candidates": self.total_candidates,
            "successful_candidates": self.successful_candidates,
            "parameters": {"attack": self.attack_params, "edge": self.edge_params},
        }
        if self.candidates is not None:
            doc["candidates"] = [outcome_dict(o) for o in self.candidates]
        return doc

    def summary_row(self) -> tuple:
        """One summary row shaped like the attack-outcome table."""
        if self.best is None:
            return (self.sign_name, self.leaf_species.capitalize(), "", "", "No")
        return (
            self.sign_name,
            self.leaf_species.capitalize(),
            self.label_text(self.best.predicted_label),
            f"{self.best.confidence_percent:.2f}",
            "Yes" if self.best.success else "No",
        )


def patch_side(ratio: float, sign_mask: BinaryMask) -> int:
    """Side of the square patch bounding box for a ratio of the sign-face area."""
    if not 0 < ratio <= 1:
        raise ValueError(f"ratio must lie in (0, 1], got {ratio}")
    side = int(np.floor(np.sqrt(ratio * sign_mask.area) + 0.5))
    return max(side, 1)


def prepare_patch(leaf: LeafAsset, side: int, angle_deg: float) -> tuple[RasterImage, BinaryMask]:
    """Scale the leaf so its longer dimension equals ``side``, then rotate it."""
    if side < 1:
        raise ValueError(f"side must be >= 1, got {side}")
    w, h = leaf.image.width, leaf.image.height
    if w >= h:
        new_w = side
        new_h = max(1, int(np.floor(h * side / w + 0.5)))
    else:
        new_h = side
        new_w = max(1, int(np.floor(w * side / h + 0.5)))
    img = scale(leaf.image, new_w, new_h, mode="bilinear")
    mask = scale_mask(leaf.mask, new_w, new_h)
    if mask.area == 0:
        raise PatchError(f"leaf mask is empty after scaling to {new_w}x{new_h}")
    img, mask = rotate(img, mask, angle_deg)
    if mask.area == 0:
        raise PatchError(f"leaf mask is empty after rotating by {angle_deg} degrees")
    return img, mask


def _contained_positions(sign_bits: np.ndarray, patch_bits: np.ndarray, stride: int) -> list:
    """(y, x) offsets where every true patch pixel lands on a true sign pixel."""
    sh, sw = sign_bits.shape
    ph, pw = patch_bits.shape
    if ph > sh or pw > sw:
        return []
    uncovered = (~sign_bits).astype(np.int64)
    windows = np.lib.stride_tricks.sliding_window_view(uncovered, (ph, pw))[::stride, ::stride]
    violations = np.einsum("yxij,ij->yx", windows, patch_bits.astype(np.int64))
    ys, xs = np.nonzero(violations == 0)
    return [(int(y) * stride, int(x) * stride) for y, x in zip(ys, xs)]


def enumerate_candidates(cfg: AttackConfig, sign: SignInstance, leaf: LeafAsset) -> list:
    """All placements keeping the patch on the sign face, in deterministic order."""
    out = []
    for ratio in cfg.patch_ratios:
        side = patch_side(ratio, sign.sign_mask)
        for angle in cfg.angles_deg:
            _, pmask = prepare_patch(leaf, side, angle)
            bits = np.ones_like(pmask.bits) if cfg.bbox_containment else pmask.bits
            for y, x in _contained_positions(sign.sign_mask.bits, bits, cfg.grid_stride):
                out.append(
                    PlacementCandidate(
                        x=x, y=y, patch_ratio=ratio, angle_deg=angle,
                        patch_w=pmask.width, patch_h=pmask.height,
                    )
                )
    return out


def composite_candidate(cand: PlacementCandidate, sign: SignInstance, leaf: LeafAsset) -> RasterImage:
    """Rebuild the composited image for a candidate (used for reports and checks)."""
    side = patch_side(cand.patch_ratio, sign.sign_mask)
    pimg, pmask = prepare_patch(leaf, side, cand.angle_deg)
    return composite(sign.image, pimg, pmask, cand.x, cand.y)


def run_attack(
    cfg: AttackConfig,
    sign: SignInstance,
    leaf: LeafAsset,
    edge_params: EdgeParams | None = None,
    keep_candidates: bool = False,
) -> AttackReport:
    """Composite and classify every candidate, then pick the strongest result.

    The best outcome is the successful misclassification with the highest
    confidence (earliest candidate on ties). When nothing misclassifies, the
    candidate minimizing the true label's probability is reported instead,
    flagged via ``best_is_fallback``.
    """
    edge_params = edge_params or EdgeParams()
    candidates = enumerate_candidates(cfg, sign, leaf)

    patch_cache: dict = {}
    outcomes = [] if keep_candidates else None
    best_success: AttackOutcome | None = None
    fallback: AttackOutcome | None = None
    fallback_prob = float("inf")
    n_success = 0

    for cand in candidates:
        key = (cand.patch_ratio, cand.angle_deg)
        if key not in patch_cache:
            side = patch_side(cand.patch_ratio, sign.sign_mask)
            patch_cache[key] = prepare_patch(leaf, side, cand.angle_deg)
        pimg, pmask = patch_cache[key]
        adv = composite(sign.image, pimg, pmask, cand.x, cand.y)
        probs: Probabilities = cfg.classify(adv)
        if sign.true_label >= len(probs.probs):
            raise ValueError(
                f"true_label {sign.true_label} out of range for {len(probs.probs)} classes"
            )
        success = probs.predicted != sign.true_label
        outcome = AttackOutcome(cand, probs.predicted, probs.confidence_percent, success)
        if outcomes is not None:
            outcomes.append(outcome)
        if success:
            n_success += 1
            if best_success is None or probs.confidence_percent > best_success.confidence_percent:
                best_success = outcome
        true_prob = probs.probs[sign.true_label]
        if true_prob < fallback_prob:
            fallback_prob = true_prob
            fallback = outcome

    best = best_success if best_success is not None else fallback
    return AttackReport(
        sign_name=sign.name,
        leaf_species=leaf.species.value,
        true_label=sign.true_label,
        best=best,
        best_is_fallback=best_success is None and best is not None,
        total_candidates=len(candidates),
        successful_candidates=n_success,
        attack_params=cfg.params_dict(),
        edge_params=edge_params.as_dict(),
        class_labels=getattr(cfg.classify, "class_labels", None),
        candidates=tuple(outcomes) if outcomes is not None else None,
    )
