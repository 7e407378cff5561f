"""Exception hierarchy used across the package.

Every error carries a short stable ``code`` so that callers (and the CLI)
can map failures to machine-readable categories without parsing messages.
"""


class LatentMatchError(Exception):
    """Base class for all errors raised by latentmatch."""

    code = "error"


# --- template file format -------------------------------------------------

class TemplateFormatError(LatentMatchError):
    """Template file is structurally invalid."""

    code = "format_error"


class MagicMismatchError(TemplateFormatError):
    code = "magic_mismatch"


class VersionMismatchError(TemplateFormatError):
    code = "version_mismatch"


class TruncatedPayloadError(TemplateFormatError):
    code = "truncated_payload"


# --- imaging / descriptors ------------------------------------------------

class EmptyRoiError(LatentMatchError):
    """The region-of-interest mask covers no block of the image."""

    code = "empty_roi"


class MissingPatchTypeError(LatentMatchError):
    code = "missing_patch_type"


class PatchSetMismatchError(LatentMatchError):
    """Descriptors do not share the same set of patch types."""

    code = "patch_set_mismatch"


# --- geometry / correspondence --------------------------------------------

class CoincidentMinutiaeError(LatentMatchError):
    code = "coincident_minutiae"


class DegenerateTripletError(LatentMatchError):
    """Three minutiae are (near-)collinear; triangle features undefined."""

    code = "degenerate_triplet"


class ZeroMatrixError(LatentMatchError):
    code = "zero_matrix"


class ZeroTensorError(LatentMatchError):
    code = "zero_tensor"


class EmptyTemplateError(LatentMatchError):
    code = "empty_template"


class EmptyCorrespondencesError(LatentMatchError):
    code = "empty_correspondences"


# --- synthesis -------------------------------------------------------------

class PlacementFailureError(LatentMatchError):
    """Minimum-separation minutiae placement could not be satisfied."""

    code = "placement_failure"


# --- database / evaluation --------------------------------------------------

class DuplicateSubjectError(LatentMatchError):
    code = "duplicate_subject"


class EmptyDbError(LatentMatchError):
    code = "empty_db"


class MissingTruthError(LatentMatchError):
    code = "missing_truth"


class QueryMismatchError(LatentMatchError):
    code = "query_mismatch"
