"""Graph-based minutiae correspondence.

Candidate minutia pairs selected by descriptor similarity are scored for
geometric consistency with a pairwise compatibility matrix and a triplet
compatibility tensor; relaxed assignments come from power iteration and are
projected to one-to-one matchings by a greedy discretization.  The full
pipeline is :func:`match_minutiae`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import angles
from .config import EngineConfig, SigmoidParams
from .descriptors import similarity_matrix
from .errors import (CoincidentMinutiaeError, DegenerateTripletError,
                     EmptyTemplateError, ZeroMatrixError, ZeroTensorError)
from .model import Minutia

TWO_PI = angles.TWO_PI

#: triangles with |cross product| below this fraction of the squared longest
#: side are treated as collinear
DEGENERACY_EPS = 1e-7


class MatchStage(Enum):
    SECOND_ORDER = "second_order"
    THIRD_ORDER = "third_order"


@dataclass(frozen=True)
class CandidatePair:
    """A candidate correspondence: latent index, reference index, descriptor
    similarity."""

    i1: int
    i2: int
    sim: float


@dataclass
class CorrespondenceSet:
    """One-to-one minutia correspondences with per-pair similarities."""

    pairs: list[CandidatePair]
    stage: MatchStage = MatchStage.SECOND_ORDER

    def __post_init__(self):
        left = [p.i1 for p in self.pairs]
        right = [p.i2 for p in self.pairs]
        if len(set(left)) != len(left) or len(set(right)) != len(right):
            raise ValueError("correspondences are not one-to-one")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def index_pairs(self) -> list[tuple[int, int]]:
        return [(p.i1, p.i2) for p in self.pairs]

    @property
    def sims(self) -> np.ndarray:
        return np.array([p.sim for p in self.pairs], dtype=np.float64)


# --------------------------------------------------------------------------
# compatibility kernel


def truncated_sigmoid(v, params: SigmoidParams):
    """1 / (1 + exp(-tau (v - mu))) for v <= t, 0 otherwise.

    Accepts scalars or arrays; output lies in [0, 1).
    """
    arr = np.asarray(v, dtype=np.float64)
    z = 1.0 / (1.0 + np.exp(-params.tau * (arr - params.mu)))
    out = np.where(arr <= params.t, z, 0.0)
    if np.isscalar(v) or arr.ndim == 0:
        return float(out)
    return out


# --------------------------------------------------------------------------
# pair and triplet features


def pair_feature(mi: Minutia, mj: Minutia) -> tuple[float, float, float, float]:
    """4-vector (d, theta_i, theta_j, theta_ij) describing a minutia pair.

    d is the Euclidean distance; theta_i and theta_j are the minutia
    directions measured against the connecting line i->j; theta_ij is the
    direction difference.  The vector is invariant to rigid motions.
    """
    dx = mj.x - mi.x
    dy = mj.y - mi.y
    d = math.hypot(dx, dy)
    if d == 0.0:
        raise CoincidentMinutiaeError(
            f"minutiae coincide at ({mi.x}, {mi.y})")
    phi = math.atan2(dy, dx)
    theta_i = angles.wrap_direction(mi.alpha - phi)
    theta_j = angles.wrap_direction(mj.alpha - phi)
    theta_ij = angles.wrap_direction(mi.alpha - mj.alpha)
    return d, theta_i, theta_j, theta_ij


def _triplet_order(xs, ys):
    """Cyclic successor of each vertex: counter-clockwise traversal starting
    from the first vertex (clockwise triangles are traversed 0->2->1)."""
    cross = (xs[1] - xs[0]) * (ys[2] - ys[0]) - \
            (ys[1] - ys[0]) * (xs[2] - xs[0])
    if cross > 0:
        return cross, (1, 2, 0)
    return cross, (2, 0, 1)


def triplet_feature(mi: Minutia, mj: Minutia, mk: Minutia
                    ) -> tuple[float, ...]:
    """9-vector (d_i, d_j, d_k, theta_i, theta_j, theta_k, phi_i, phi_j,
    phi_k) describing a minutia triplet.

    Vertices are traversed counter-clockwise starting from the first
    argument; d_p is the length of the side leaving vertex p, theta_p the
    vertex direction against that side, phi_p the interior angle at p.
    Invariant to rigid motions; raises DegenerateTripletError for
    (near-)collinear triplets.
    """
    xs = np.array([mi.x, mj.x, mk.x])
    ys = np.array([mi.y, mj.y, mk.y])
    alphas = [mi.alpha, mj.alpha, mk.alpha]

    cross, succ = _triplet_order(xs, ys)
    side_sq = max(
        (xs[1] - xs[0]) ** 2 + (ys[1] - ys[0]) ** 2,
        (xs[2] - xs[1]) ** 2 + (ys[2] - ys[1]) ** 2,
        (xs[0] - xs[2]) ** 2 + (ys[0] - ys[2]) ** 2,
    )
    if side_sq == 0.0 or abs(cross) <= DEGENERACY_EPS * side_sq:
        raise DegenerateTripletError("collinear or coincident minutiae")

    d = [0.0] * 3
    theta = [0.0] * 3
    phi = [0.0] * 3
    for p in range(3):
        n = succ[p]
        prev = succ.index(p)  # vertex whose successor is p
        dx, dy = xs[n] - xs[p], ys[n] - ys[p]
        d[p] = math.hypot(dx, dy)
        theta[p] = angles.wrap_direction(alphas[p] - math.atan2(dy, dx))
        ux, uy = xs[n] - xs[p], ys[n] - ys[p]
        wx, wy = xs[prev] - xs[p], ys[prev] - ys[p]
        phi[p] = abs(math.atan2(ux * wy - uy * wx, ux * wx + uy * wy))
    return (d[0], d[1], d[2], theta[0], theta[1], theta[2],
            phi[0], phi[1], phi[2])


# --------------------------------------------------------------------------
# candidate selection


def select_top_pairs(sim: np.ndarray, n: int) -> list[CandidatePair]:
    """The n highest-similarity (i1, i2) entries of a similarity matrix.

    Ties break by (i1, i2) ascending; the result is sorted by similarity
    descending.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if sim.size == 0:
        return []
    flat = sim.ravel()
    n_r = sim.shape[1]
    if n < flat.size:
        # preselect everything at or above the n-th value, then order that
        # small slice; boundary ties stay subject to the full tie rule
        nth = np.partition(flat, flat.size - n)[flat.size - n]
        candidates = np.flatnonzero(flat >= nth)
    else:
        candidates = np.arange(flat.size)
    ii, jj = np.divmod(candidates, n_r)
    order = np.lexsort((jj, ii, -flat[candidates]))[:n]
    picked = candidates[order]
    return [CandidatePair(int(k // n_r), int(k % n_r), float(flat[k]))
            for k in picked]


# --------------------------------------------------------------------------
# pairwise compatibility matrix


def _pair_feature_grids(x: np.ndarray, y: np.ndarray, a: np.ndarray):
    """Pair features between all pairs of the given minutiae, as N x N
    grids (entry [p, q] describes the ordered pair p->q).  Angles are
    unreduced; downstream circular differences reduce them once."""
    dx = x[None, :] - x[:, None]
    dy = y[None, :] - y[:, None]
    d = np.hypot(dx, dy)
    phi = np.arctan2(dy, dx)
    th_first = a[:, None] - phi
    th_second = a[None, :] - phi
    th_diff = a[:, None] - a[None, :]
    return d, th_first, th_second, th_diff


def build_h2(pairs: list[CandidatePair], latent, reference,
             config: EngineConfig | None = None) -> np.ndarray:
    """Pairwise compatibility matrix over candidate pairs.

    Entry (p, q) multiplies the truncated-sigmoid responses to the length
    difference and the three angular differences of the latent pair
    (i1_p, i1_q) versus the reference pair (i2_p, i2_q).  Entries where the
    two candidates share a latent or reference minutia, and the diagonal,
    are zero; the matrix is symmetric with values in [0, 1].
    """
    if config is None:
        config = EngineConfig()
    n = len(pairs)
    if n == 0:
        return np.zeros((0, 0))
    li = np.array([p.i1 for p in pairs])
    ri = np.array([p.i2 for p in pairs])

    lx, ly, la = _minutia_arrays(latent)
    rx, ry, ra = _minutia_arrays(reference)

    d_l, thi_l, thj_l, thij_l = _pair_feature_grids(lx[li], ly[li], la[li])
    d_r, thi_r, thj_r, thij_r = _pair_feature_grids(rx[ri], ry[ri], ra[ri])

    z = truncated_sigmoid(np.abs(d_l - d_r), config.euclidean)
    z = z * truncated_sigmoid(angles.circular_difference(thi_l, thi_r),
                              config.directional)
    z = z * truncated_sigmoid(angles.circular_difference(thj_l, thj_r),
                              config.directional)
    z = z * truncated_sigmoid(angles.circular_difference(thij_l, thij_r),
                              config.directional)

    conflict = (li[:, None] == li[None, :]) | (ri[:, None] == ri[None, :])
    z[conflict] = 0.0
    upper = np.triu(z, 1)
    return upper + upper.T  # exact symmetry as stored


def _minutia_arrays(template):
    points = template.points if hasattr(template, "points") else template
    x = np.array([m.x for m in points], dtype=np.float64)
    y = np.array([m.y for m in points], dtype=np.float64)
    a = np.array([m.alpha for m in points], dtype=np.float64)
    return x, y, a


# --------------------------------------------------------------------------
# triplet compatibility tensor


@dataclass
class H3Tensor:
    """Sparse symmetric order-3 tensor over candidate pairs.

    Entries are stored once per index set {i, j, k} (strictly increasing
    triples); :meth:`value` resolves any permutation to the stored entry,
    making the tensor symmetric under all six index permutations by
    construction.
    """

    size: int
    indices: np.ndarray  # (m, 3) int64, each row strictly increasing
    values: np.ndarray   # (m,) float64 in (0, 1)

    def __post_init__(self):
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int64) \
            .reshape(-1, 3)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        n = self.size
        self._keys = (self.indices[:, 0] * n + self.indices[:, 1]) * n \
            + self.indices[:, 2]
        order = np.argsort(self._keys)
        self.indices = self.indices[order]
        self.values = self.values[order]
        self._keys = self._keys[order]

    @property
    def nnz(self) -> int:
        return self.values.size

    def value(self, i: int, j: int, k: int) -> float:
        a, b, c = sorted((i, j, k))
        if a == b or b == c:
            return 0.0
        key = (a * self.size + b) * self.size + c
        pos = np.searchsorted(self._keys, key)
        if pos < self._keys.size and self._keys[pos] == key:
            return float(self.values[pos])
        return 0.0


def _triplet_feature_block(x, y, a, ia, ib, ic):
    """Vectorized triplet features for index triples (ia, ib, ic): side
    lengths, direction-vs-side angles and interior angles, one slot per
    vertex.  Returns (d, theta, phi) each of shape (m, 3) plus a mask of
    non-degenerate triangles."""
    xs = np.stack([x[ia], x[ib], x[ic]], axis=1)
    ys = np.stack([y[ia], y[ib], y[ic]], axis=1)
    aa = np.stack([a[ia], a[ib], a[ic]], axis=1)

    cross = (xs[:, 1] - xs[:, 0]) * (ys[:, 2] - ys[:, 0]) - \
            (ys[:, 1] - ys[:, 0]) * (xs[:, 2] - xs[:, 0])
    ccw = cross > 0

    d = np.empty_like(xs)
    theta = np.empty_like(xs)
    phi = np.empty_like(xs)
    succ_ccw = (1, 2, 0)
    succ_cw = (2, 0, 1)
    pred_ccw = (2, 0, 1)
    pred_cw = (1, 2, 0)
    for p in range(3):
        nxt = np.where(ccw, succ_ccw[p], succ_cw[p])
        prv = np.where(ccw, pred_ccw[p], pred_cw[p])
        rows = np.arange(xs.shape[0])
        ux = xs[rows, nxt] - xs[:, p]
        uy = ys[rows, nxt] - ys[:, p]
        wx = xs[rows, prv] - xs[:, p]
        wy = ys[rows, prv] - ys[:, p]
        d[:, p] = np.hypot(ux, uy)
        theta[:, p] = aa[:, p] - np.arctan2(uy, ux)  # reduced downstream
        phi[:, p] = np.abs(np.arctan2(ux * wy - uy * wx, ux * wx + uy * wy))

    side_sq = np.max(d, axis=1) ** 2
    ok = (side_sq > 0) & (np.abs(cross) > DEGENERACY_EPS * side_sq)
    return d, theta, phi, ok


def _strictly_increasing_triples(n: int) -> np.ndarray:
    """All index triples i < j < k below n, shape (C(n,3), 3), in
    lexicographic order."""
    blocks = []
    for i in range(n - 2):
        j, k = np.triu_indices(n - i - 1, k=1)
        block = np.empty((j.size, 3), dtype=np.int64)
        block[:, 0] = i
        block[:, 1] = j + i + 1
        block[:, 2] = k + i + 1
        blocks.append(block)
    if not blocks:
        return np.zeros((0, 3), dtype=np.int64)
    return np.concatenate(blocks)


def build_h3(pairs: list[CandidatePair], latent, reference,
             config: EngineConfig | None = None,
             chunk_size: int = 200_000) -> H3Tensor:
    """Triplet compatibility tensor over candidate pairs.

    Each stored entry multiplies nine truncated-sigmoid responses: three
    side-length differences plus six angular differences between the latent
    and reference triangles spanned by three candidate pairs.  Triples with
    a shared latent or reference minutia, degenerate geometry, or any zero
    factor are omitted from the sparse storage.
    """
    if config is None:
        config = EngineConfig()
    n = len(pairs)
    if n < 3:
        return H3Tensor(size=n, indices=np.zeros((0, 3), dtype=np.int64),
                        values=np.zeros(0))
    li = np.array([p.i1 for p in pairs])
    ri = np.array([p.i2 for p in pairs])
    lx, ly, la = _minutia_arrays(latent)
    rx, ry, ra = _minutia_arrays(reference)

    triples = _strictly_increasing_triples(n)
    kept_idx = []
    kept_val = []
    for start in range(0, triples.shape[0], chunk_size):
        chunk = triples[start:start + chunk_size]
        ia, ib, ic = chunk[:, 0], chunk[:, 1], chunk[:, 2]
        valid = (li[ia] != li[ib]) & (li[ia] != li[ic]) & \
                (li[ib] != li[ic]) & (ri[ia] != ri[ib]) & \
                (ri[ia] != ri[ic]) & (ri[ib] != ri[ic])
        if not valid.any():
            continue
        chunk = chunk[valid]
        ia, ib, ic = chunk[:, 0], chunk[:, 1], chunk[:, 2]

        d_l, th_l, ph_l, ok_l = _triplet_feature_block(
            lx, ly, la, li[ia], li[ib], li[ic])
        d_r, th_r, ph_r, ok_r = _triplet_feature_block(
            rx, ry, ra, ri[ia], ri[ib], ri[ic])
        ok = ok_l & ok_r

        value = np.ones(chunk.shape[0])
        for p in range(3):
            value *= truncated_sigmoid(np.abs(d_l[:, p] - d_r[:, p]),
                                       config.euclidean)
            value *= truncated_sigmoid(
                angles.circular_difference(th_l[:, p], th_r[:, p]),
                config.directional)
            value *= truncated_sigmoid(
                angles.circular_difference(ph_l[:, p], ph_r[:, p]),
                config.directional)
        keep = ok & (value > 0.0)
        if keep.any():
            kept_idx.append(chunk[keep])
            kept_val.append(value[keep])

    if kept_idx:
        indices = np.concatenate(kept_idx)
        values = np.concatenate(kept_val)
    else:
        indices = np.zeros((0, 3), dtype=np.int64)
        values = np.zeros(0)
    return H3Tensor(size=n, indices=indices, values=values)


# --------------------------------------------------------------------------
# power iterations


def power_iteration_2(h2: np.ndarray, tol: float = 1e-6,
                      max_iterations: int = 100) -> np.ndarray:
    """Principal eigenvector of a non-negative symmetric matrix.

    Starts from the uniform positive vector (deterministic) and iterates
    ``Y <- H Y / ||H Y||`` until the update moves less than ``tol`` or the
    iteration cap is reached.  Output is non-negative with unit norm.
    """
    h2 = np.asarray(h2, dtype=np.float64)
    if h2.size == 0 or not h2.any():
        raise ZeroMatrixError("compatibility matrix has no nonzero entries")
    n = h2.shape[0]
    y = np.full(n, 1.0 / math.sqrt(n))
    for _ in range(max_iterations):
        y_new = h2 @ y
        norm = np.linalg.norm(y_new)
        if norm == 0.0:
            raise ZeroMatrixError("power iteration collapsed to zero")
        y_new /= norm
        if np.linalg.norm(y_new - y) < tol:
            return y_new
        y = y_new
    return y


def power_iteration_3(h3: H3Tensor, tol: float = 1e-6,
                      max_iterations: int = 100) -> np.ndarray:
    """Dominant vector of a sparse symmetric order-3 tensor.

    Iterates ``Y_i <- sum_{j,k} H3[i,j,k] Y_j Y_k`` with normalization
    each step; since entries are stored once per index set, each stored
    entry contributes twice per slot (the two orderings of the remaining
    indices).
    """
    if h3.nnz == 0:
        raise ZeroTensorError("triplet tensor has no stored entries")
    n = h3.size
    ia, ib, ic = h3.indices[:, 0], h3.indices[:, 1], h3.indices[:, 2]
    v2 = 2.0 * h3.values
    y = np.full(n, 1.0 / math.sqrt(n))
    for _ in range(max_iterations):
        y_new = (np.bincount(ia, weights=v2 * y[ib] * y[ic], minlength=n)
                 + np.bincount(ib, weights=v2 * y[ia] * y[ic], minlength=n)
                 + np.bincount(ic, weights=v2 * y[ia] * y[ib], minlength=n))
        norm = np.linalg.norm(y_new)
        if norm == 0.0:
            raise ZeroTensorError("power iteration collapsed to zero")
        y_new /= norm
        if np.linalg.norm(y_new - y) < tol:
            return y_new
        y = y_new
    return y


# --------------------------------------------------------------------------
# discretization and the full pipeline


def discretize(y: np.ndarray, pairs: list[CandidatePair], threshold: float,
               stage: MatchStage = MatchStage.SECOND_ORDER
               ) -> CorrespondenceSet:
    """Greedy projection of a relaxed assignment onto a one-to-one matching.

    Scans entries of ``y`` in descending order (ties resolved toward the
    lower pair index), accepting a candidate pair whenever neither of its
    minutiae is taken, and stops once the largest remaining value is at or
    below the threshold.
    """
    if len(y) != len(pairs):
        raise ValueError("y and pairs must have equal length")
    y = np.asarray(y, dtype=np.float64).copy()
    taken_l: set[int] = set()
    taken_r: set[int] = set()
    accepted: list[CandidatePair] = []
    while y.size and y.max() > threshold:
        k = int(np.argmax(y))
        y[k] = -np.inf
        pair = pairs[k]
        if pair.i1 in taken_l or pair.i2 in taken_r:
            continue
        taken_l.add(pair.i1)
        taken_r.add(pair.i2)
        accepted.append(pair)
    return CorrespondenceSet(pairs=accepted, stage=stage)


def match_minutiae(lt, rt, config: EngineConfig | None = None,
                   top_n: int | None = None) -> CorrespondenceSet:
    """Full correspondence pipeline between two templates.

    Descriptor similarities select the top candidate pairs; the pairwise
    stage (compatibility matrix, power iteration, discretization) removes
    most false correspondences, and, when at least
    ``config.min_third_order_pairs`` survive, the triplet stage refines the
    result the same way.  Works for true-minutiae and virtual-minutiae
    (texture) templates alike.
    """
    if config is None:
        config = EngineConfig()
    if top_n is None:
        top_n = config.top_n
    if not lt.points or not rt.points:
        raise EmptyTemplateError("cannot match an empty template")
    if not lt.descriptors or not rt.descriptors:
        raise EmptyTemplateError("templates carry no descriptors")

    sim = similarity_matrix(lt, rt, config.patch_types)
    pairs = select_top_pairs(sim, top_n)

    h2 = build_h2(pairs, lt, rt, config)
    if h2.size == 0 or not h2.any():
        return CorrespondenceSet(pairs=[], stage=MatchStage.SECOND_ORDER)
    y2 = power_iteration_2(h2, config.power_tolerance,
                           config.power_max_iterations)
    corr2 = discretize(y2, pairs, config.second_order_threshold * y2.max(),
                       MatchStage.SECOND_ORDER)
    if len(corr2) < config.min_third_order_pairs:
        return corr2

    h3 = build_h3(corr2.pairs, lt, rt, config)
    if h3.nnz == 0:
        return corr2
    y3 = power_iteration_3(h3, config.power_tolerance,
                           config.power_max_iterations)
    return discretize(y3, corr2.pairs,
                      config.third_order_threshold * y3.max(),
                      MatchStage.THIRD_ORDER)
