"""
Minutiae correspondence and alignment recovery
==============================================

Generate a synthetic reference subject, derive a degraded latent from it
(occlusion, jitter, spurious minutiae, a rigid transform), and watch the
graph-based correspondence pipeline recover the true pairing and the
transform.
"""

import math

import numpy as np

from latentmatch import (DistortionSpec, EngineConfig, estimate_alignment,
                         generate_reference, match_minutiae)
from latentmatch.synth import FieldSpec, derive_latent

rng_seed = 7
ref = generate_reference(seed=rng_seed, n_minutiae=30,
                         field_spec=FieldSpec(20, 20, 16))
print(f"reference subject {ref.subject_id}: "
      f"{len(ref.minutiae_template.minutiae)} minutiae, "
      f"{len(ref.texture_template.virtual_minutiae)} virtual minutiae")

spec = DistortionSpec(
    occlusion_fraction=0.3,          # a contiguous 30% of minutiae vanish
    position_jitter_sigma=2.5,       # pixels
    angle_jitter_sigma=math.radians(4.0),
    spurious_fraction=0.2,           # false minutiae appear
    rigid_rotation=math.radians(25.0),
    rigid_translation=(14.0, -9.0),
    descriptor_noise_sigma=0.1,
    seed=99,
)
latent, truth = derive_latent(ref, spec)
mt1 = latent.minutiae_template_1
print(f"derived latent {latent.query_id}: {len(mt1.minutiae)} minutiae "
      f"({len(truth.minutiae_map)} genuine survivors + spurious)")

# The correspondence pipeline: descriptor similarity -> top-N candidate
# pairs -> pairwise compatibility + power iteration + greedy one-to-one
# projection -> triplet compatibility refinement.
corr = match_minutiae(mt1, ref.minutiae_template, EngineConfig())
agree = sum(1 for p in corr.pairs if truth.minutiae_map.get(p.i1) == p.i2)
print(f"\nmatched {len(corr)} pairs at stage {corr.stage.value}; "
      f"{agree}/{len(corr)} agree with ground truth")
for p in corr.pairs[:8]:
    marker = "true" if truth.minutiae_map.get(p.i1) == p.i2 else "FALSE"
    print(f"  latent {p.i1:>2} -> reference {p.i2:>2}  "
          f"descriptor sim {p.sim:.3f}  [{marker}]")

# Recover the rigid transform from the matched minutiae.
alignment = estimate_alignment(corr, mt1.minutiae,
                               ref.minutiae_template.minutiae)
print(f"\ntrue transform:      rotation {truth.alignment.delta_alpha:+.6f} "
      f"rad, shift ({truth.alignment.delta_x:+.2f}, "
      f"{truth.alignment.delta_y:+.2f}) px")
print(f"recovered transform: rotation {alignment.delta_alpha:+.6f} rad, "
      f"shift ({alignment.delta_x:+.2f}, {alignment.delta_y:+.2f}) px")
rot_err = abs(alignment.delta_alpha - truth.alignment.delta_alpha)
print(f"rotation error {min(rot_err, 2 * math.pi - rot_err):.2e} rad, "
      f"shift error ({abs(alignment.delta_x - truth.alignment.delta_x):.2f}, "
      f"{abs(alignment.delta_y - truth.alignment.delta_y):.2f}) px")
print("(recovery is noise-limited here: positions carry 2.5 px jitter; "
      "on clean transforms it is exact to 1e-9)")
