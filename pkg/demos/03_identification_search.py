"""
1:N identification and CMC evaluation
=====================================

Enroll a small synthetic reference database, search degraded latents
against it with the three-template fusion, and summarize retrieval quality
as a cumulative match characteristic curve.
"""

import math
import tempfile
from pathlib import Path

from latentmatch import (DistortionSpec, compute_cmc, enroll,
                         generate_reference, search)
from latentmatch.synth import FieldSpec, derive_latent

N_SUBJECTS = 20
N_QUERIES = 10
FIELD = FieldSpec(width_blocks=16, height_blocks=16, block_size=16)

records = [generate_reference(seed=i, n_minutiae=24, field_spec=FIELD)
           for i in range(N_SUBJECTS)]

workdir = Path(tempfile.mkdtemp(prefix="latentmatch-demo-"))
db = enroll(records, workdir / "db")
print(f"enrolled {len(db)} subjects under {db.path}")

spec_base = dict(
    occlusion_fraction=0.35, position_jitter_sigma=3.0,
    angle_jitter_sigma=math.radians(5.0), spurious_fraction=0.2,
    descriptor_noise_sigma=0.1,
)

lists = []
truth = {}
for j in range(N_QUERIES):
    mate = records[j]
    spec = DistortionSpec(rigid_rotation=math.radians(10.0 + 2 * j),
                          rigid_translation=(5.0, -4.0), seed=1000 + j,
                          **spec_base)
    latent, _ = derive_latent(mate, spec, query_id=f"Q{j:02d}")
    result = search(latent, db, k=N_SUBJECTS)
    lists.append(result)
    truth[latent.query_id] = mate.subject_id
    top = result.entries[0]
    mate_rank = result.rank_of(mate.subject_id)
    print(f"{latent.query_id}: top candidate {top.subject_id} "
          f"(fused {top.score:8.2f} = mt1 {top.breakdown.s_mt1:6.2f} "
          f"+ mt2 {top.breakdown.s_mt2:6.2f} + 2*tt "
          f"{top.breakdown.s_tt:6.2f}); true mate at rank {mate_rank}")

curve = compute_cmc(lists, truth, k_max=5)
print("\ncumulative match characteristic:")
for k in range(1, 6):
    bar = "#" * int(round(40 * curve.rate(k)))
    print(f"  rank {k}: {curve.rate(k):5.2f} {bar}")
