"""Comparison scores: minutiae similarity, alignment, ridge-flow similarity
and the weighted multi-template fusion."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .config import EngineConfig
from .errors import EmptyCorrespondencesError
from .matching import CorrespondenceSet, match_minutiae
from .model import MinutiaeTemplate, OrientationField, TextureTemplate


@dataclass(frozen=True)
class Alignment:
    """Rigid motion mapping latent coordinates onto reference coordinates:
    rotate by delta_alpha, then translate by (delta_x, delta_y)."""

    delta_alpha: float  # radians, in (-pi, pi]
    delta_x: float
    delta_y: float

    def transform(self, x, y):
        cos_a = math.cos(self.delta_alpha)
        sin_a = math.sin(self.delta_alpha)
        tx = np.asarray(x) * cos_a - np.asarray(y) * sin_a + self.delta_x
        ty = np.asarray(x) * sin_a + np.asarray(y) * cos_a + self.delta_y
        return tx, ty


def minutiae_similarity(corr: CorrespondenceSet) -> float:
    """Sum of descriptor similarities over matched pairs (0 when empty)."""
    return float(corr.sims.sum()) if len(corr) else 0.0


def estimate_alignment(corr: CorrespondenceSet, latent_minutiae,
                       reference_minutiae) -> Alignment:
    """Least-squares-style rigid alignment from matched minutiae.

    The rotation is the circular mean of the per-pair direction differences
    (reference minus latent); the translation is the mean residual after
    rotating the latent minutiae.
    """
    if not len(corr):
        raise EmptyCorrespondencesError("cannot align an empty match")
    d_sin = 0.0
    d_cos = 0.0
    for i1, i2 in corr.index_pairs:
        d_alpha = reference_minutiae[i2].alpha - latent_minutiae[i1].alpha
        d_sin += math.sin(d_alpha)
        d_cos += math.cos(d_alpha)
    delta_alpha = math.atan2(d_sin, d_cos)

    cos_a = math.cos(delta_alpha)
    sin_a = math.sin(delta_alpha)
    dx = 0.0
    dy = 0.0
    for i1, i2 in corr.index_pairs:
        ml = latent_minutiae[i1]
        mr = reference_minutiae[i2]
        dx += mr.x - (ml.x * cos_a - ml.y * sin_a)
        dy += mr.y - (ml.x * sin_a + ml.y * cos_a)
    n = len(corr)
    return Alignment(delta_alpha=delta_alpha, delta_x=dx / n, delta_y=dy / n)


def ridge_flow_similarity(of_l: OrientationField, of_r: OrientationField,
                          alignment: Alignment) -> float:
    """Coherence of the orientation difference over overlapping blocks.

    Each masked latent block center is mapped through the alignment into
    the reference field (nearest block); over the K overlapping masked
    blocks the magnitude of the mean doubled-angle phasor of the
    orientation difference is returned.  K = 0 yields 0.
    """
    if not of_l.mask.any() or not of_r.mask.any():
        return 0.0
    cx, cy = of_l.block_centers()
    sel = of_l.mask
    tx, ty = alignment.transform(cx[sel], cy[sel])

    bx = np.floor(tx / of_r.block_size).astype(np.int64)
    by = np.floor(ty / of_r.block_size).astype(np.int64)
    inside = (bx >= 0) & (bx < of_r.width_blocks) & \
             (by >= 0) & (by < of_r.height_blocks)
    if not inside.any():
        return 0.0
    bx, by = bx[inside], by[inside]
    overlap = of_r.mask[by, bx]
    if not overlap.any():
        return 0.0

    o_latent = of_l.theta[sel][inside][overlap] + alignment.delta_alpha
    o_reference = of_r.theta[by[overlap], bx[overlap]]
    phasors = np.exp(2j * (o_latent - o_reference))
    return float(np.abs(phasors.mean()))


def minutiae_template_similarity(lt: MinutiaeTemplate, rt: MinutiaeTemplate,
                                 config: EngineConfig | None = None
                                 ) -> tuple[float, CorrespondenceSet]:
    """Minutiae template score: (descriptor similarity sum) x (ridge-flow
    similarity), together with the correspondences that produced it."""
    if config is None:
        config = EngineConfig()
    empty = CorrespondenceSet(pairs=[])
    if not lt.minutiae or not rt.minutiae or not lt.descriptors \
            or not rt.descriptors:
        return 0.0, empty
    corr = match_minutiae(lt, rt, config, top_n=config.top_n)
    if not len(corr):
        return 0.0, corr
    s_m = minutiae_similarity(corr)
    alignment = estimate_alignment(corr, lt.minutiae, rt.minutiae)
    s_o = ridge_flow_similarity(lt.orientation_field, rt.orientation_field,
                                alignment)
    return s_m * s_o, corr


def texture_template_similarity(lt: TextureTemplate, rt: TextureTemplate,
                                config: EngineConfig | None = None
                                ) -> tuple[float, CorrespondenceSet]:
    """Texture template score: sum of matched virtual-minutiae descriptor
    similarities (no ridge-flow factor)."""
    if config is None:
        config = EngineConfig()
    empty = CorrespondenceSet(pairs=[])
    if not lt.virtual_minutiae or not rt.virtual_minutiae \
            or not lt.descriptors or not rt.descriptors:
        return 0.0, empty
    corr = match_minutiae(lt, rt, config, top_n=config.texture_top_n)
    return minutiae_similarity(corr), corr


def fuse_scores(s_mt1: float, s_mt2: float, s_tt: float,
                weights: tuple[float, float, float] = (1.0, 1.0, 2.0)
                ) -> float:
    """Weighted sum of the two minutiae-template scores and the texture
    score."""
    w1, w2, w3 = weights
    if w1 < 0 or w2 < 0 or w3 < 0:
        raise ValueError("fusion weights must be non-negative")
    return w1 * s_mt1 + w2 * s_mt2 + w3 * s_tt


@dataclass
class ScoreBreakdown:
    """Every component of one latent-to-subject comparison."""

    s_mt1: float
    s_mt2: float
    s_tt: float
    s_final: float
    n_corr_1: int
    n_corr_2: int
    n_corr_tt: int

    def to_json_line(self, query_id: str, subject_id: str) -> str:
        return json.dumps({
            "query_id": query_id,
            "subject_id": subject_id,
            "s_mt1": self.s_mt1,
            "s_mt2": self.s_mt2,
            "s_tt": self.s_tt,
            "s_final": self.s_final,
            "n_corr_1": self.n_corr_1,
            "n_corr_2": self.n_corr_2,
            "n_corr_tt": self.n_corr_tt,
        }, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreBreakdown":
        return cls(s_mt1=d["s_mt1"], s_mt2=d["s_mt2"], s_tt=d["s_tt"],
                   s_final=d["s_final"], n_corr_1=d["n_corr_1"],
                   n_corr_2=d["n_corr_2"], n_corr_tt=d["n_corr_tt"])

    def as_dict(self) -> dict:
        return {"s_mt1": self.s_mt1, "s_mt2": self.s_mt2, "s_tt": self.s_tt,
                "s_final": self.s_final, "n_corr_1": self.n_corr_1,
                "n_corr_2": self.n_corr_2, "n_corr_tt": self.n_corr_tt}


def score_subject(latent_mt1, latent_mt2, latent_tt, record,
                  config: EngineConfig | None = None) -> ScoreBreakdown:
    """Compare a latent's three templates against one enrolled subject."""
    if config is None:
        config = EngineConfig()
    s1, c1 = minutiae_template_similarity(latent_mt1,
                                          record.minutiae_template, config)
    s2, c2 = minutiae_template_similarity(latent_mt2,
                                          record.minutiae_template, config)
    s3, c3 = texture_template_similarity(latent_tt, record.texture_template,
                                         config)
    final = fuse_scores(s1, s2, s3, config.weights)
    return ScoreBreakdown(s_mt1=s1, s_mt2=s2, s_tt=s3, s_final=final,
                          n_corr_1=len(c1), n_corr_2=len(c2),
                          n_corr_tt=len(c3))
