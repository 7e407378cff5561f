"""latentmatch: latent-to-reference fingerprint identification.

Library layout:

- :mod:`latentmatch.model` -- domain types and template validation
- :mod:`latentmatch.template_io` -- bit-exact binary template files
- :mod:`latentmatch.imaging` -- orientation fields, virtual minutiae, patches
- :mod:`latentmatch.descriptors` -- patch catalog, baseline descriptor,
  similarity and candidate selection
- :mod:`latentmatch.matching` -- graph-based minutiae correspondence
- :mod:`latentmatch.scoring` -- alignment, component scores and fusion
- :mod:`latentmatch.synth` -- synthetic subjects/latents with ground truth
- :mod:`latentmatch.database` -- enrollment and 1:N search
- :mod:`latentmatch.evaluation` -- CMC, candidate-list fusion, SFS
"""

from .config import (DIRECTIONAL_PARAMS, EUCLIDEAN_PARAMS, EngineConfig,
                     SigmoidParams)
from .database import (CandidateEntry, CandidateList, ReferenceDb, enroll,
                       open_db, search)
from .descriptors import (CATALOG_IDS, DEFAULT_PATCH_TYPES, PATCH_CATALOG,
                          PatchTypeCatalog, compute_descriptor,
                          descriptor_similarity, similarity_matrix)
from .evaluation import (CmcCurve, FusionMode, SfsBenchmark, compute_cmc,
                         fuse_external_scores, sfs_patch_selection)
from .imaging import (GrayImage, Patch, estimate_orientation_field,
                      extract_patch, latent_virtual_minutiae, load_gray_image,
                      reference_virtual_minutiae)
from .matching import (CandidatePair, CorrespondenceSet, H3Tensor, MatchStage,
                       build_h2, build_h3, discretize, match_minutiae,
                       pair_feature, power_iteration_2, power_iteration_3,
                       select_top_pairs, triplet_feature, truncated_sigmoid)
from .model import (Descriptor, Minutia, MinutiaKind, MinutiaeTemplate,
                    OrientationField, SubjectRecord, TemplateVariant,
                    TextureSide, TextureTemplate, ValidationReport,
                    validate_template)
from .scoring import (Alignment, ScoreBreakdown, estimate_alignment,
                      fuse_scores, minutiae_similarity,
                      minutiae_template_similarity, ridge_flow_similarity,
                      score_subject, texture_template_similarity)
from .synth import (DistortionSpec, FieldSpec, GroundTruth, LatentQuery,
                    derive_latent, generate_reference)
from .template_io import (load_template, save_template, template_from_bytes,
                          template_to_bytes, templates_equal)

__version__ = "0.1.0"
