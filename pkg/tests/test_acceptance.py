"""Acceptance suite: one test per criterion, one printed line each.

Thresholds are frozen.  The assignment-objective ratio bound (criterion 4)
was calibrated once on the committed seed: the observed worst ratio was
0.99998, so the expected bound 0.9 is pinned and must not regress.  The
identification benchmark (criterion 6) pins rank-1 >= 0.9 on the committed
seeds after the same one-time calibration.
"""

import json
import math
import time

import numpy as np

from latentmatch.cli import main as cli_main
from latentmatch.config import EUCLIDEAN_PARAMS, EngineConfig
from latentmatch.database import CandidateEntry, CandidateList, enroll, search
from latentmatch.errors import ZeroMatrixError
from latentmatch.evaluation import (FusionMode, compute_cmc,
                                    fuse_external_scores)
from latentmatch.imaging import GrayImage, estimate_orientation_field
from latentmatch.matching import (CandidatePair, build_h2, discretize,
                                  match_minutiae, power_iteration_2,
                                  truncated_sigmoid)
from latentmatch.model import Minutia
from latentmatch.scoring import estimate_alignment
from latentmatch.synth import (DistortionSpec, FieldSpec, derive_latent,
                               generate_reference)

# calibrated once, then pinned (see module docstring)
QAP_RATIO_BOUND = 0.9
QAP_SEED = 12345
BENCHMARK_RANK1_BOUND = 0.9
BENCHMARK_SEED = 20_240_601


def ok(message):
    print(f"[PASS] {message}")


class TestCriterion01OneToOne:
    def test_discretize_is_one_to_one(self):
        start = time.time()
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(1, 60))
            pairs = [CandidatePair(int(rng.integers(0, 15)),
                                   int(rng.integers(0, 15)), 0.0)
                     for _ in range(n)]
            y = rng.random(n)
            threshold = float(rng.random() * 0.9)
            corr = discretize(y, pairs, threshold)
            left = [p.i1 for p in corr.pairs]
            right = [p.i2 for p in corr.pairs]
            assert len(set(left)) == len(left)
            assert len(set(right)) == len(right)
        elapsed = time.time() - start
        assert elapsed < 5.0
        ok(f"criterion 1: one-to-one held on 1000 randomized "
           f"discretizations in {elapsed:.2f}s")


class TestCriterion02RigidMotionInvariance:
    # a compact ROI keeps every minutia strictly inside the frame for any
    # rotation about the center, so transformed copies are never clipped
    FIELD = FieldSpec(width_blocks=20, height_blocks=20, block_size=16,
                      roi_semi_axes=(0.70, 0.74))

    def test_transformed_latent_matches_identically(self):
        rng = np.random.default_rng(2)
        center = self.FIELD.width_px / 2.0
        identical = 0
        for seed in range(200):
            ref = generate_reference(seed=seed, n_minutiae=20,
                                     field_spec=self.FIELD)
            rot = float(rng.uniform(-math.pi, math.pi))
            # rotate about the field center plus a small shift: all
            # minutiae stay inside the frame, so nothing is clipped
            ux, uy = rng.uniform(-4.0, 4.0, size=2)
            tx = center - math.cos(rot) * center + math.sin(rot) * center \
                + float(ux)
            ty = center - math.sin(rot) * center - math.cos(rot) * center \
                + float(uy)
            moved_spec = DistortionSpec(rigid_rotation=rot,
                                        rigid_translation=(tx, ty),
                                        seed=seed)
            still_spec = DistortionSpec(seed=seed)
            moved, gt = derive_latent(ref, moved_spec)
            still, _ = derive_latent(ref, still_spec)

            corr_moved = match_minutiae(moved.minutiae_template_1,
                                        ref.minutiae_template)
            corr_still = match_minutiae(still.minutiae_template_1,
                                        ref.minutiae_template)
            assert sorted(corr_moved.index_pairs) \
                == sorted(corr_still.index_pairs)
            identical += 1

            alignment = estimate_alignment(
                corr_moved, moved.minutiae_template_1.minutiae,
                ref.minutiae_template.minutiae)
            d = abs(alignment.delta_alpha - gt.alignment.delta_alpha) \
                % (2 * math.pi)
            assert min(d, 2 * math.pi - d) < 1e-9
            assert abs(alignment.delta_x - gt.alignment.delta_x) < 1e-9
            assert abs(alignment.delta_y - gt.alignment.delta_y) < 1e-9
        assert identical == 200
        ok("criterion 2: 200/200 rigid transforms matched identically; "
           "alignment recovered to 1e-9")


class TestCriterion03EigenOracle:
    def test_power_iteration_matches_eigh(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(2, 51))
            a = rng.random((n, n))
            h = (a + a.T) / 2.0
            y = power_iteration_2(h, tol=1e-15, max_iterations=20_000)
            w, v = np.linalg.eigh(h)
            oracle = v[:, int(np.argmax(w))]
            cosine = abs(float(oracle @ y))
            assert cosine >= 1.0 - 1e-9
        ok("criterion 3: principal eigenvector matched dense "
           "eigendecomposition (cosine >= 1 - 1e-9) on 100 matrices")


def _brute_force_best_s2(h2, pairs):
    """Exhaustive optimum of the pairwise objective over all one-to-one
    subsets of candidate pairs (feasible for n <= 12)."""
    n = len(pairs)
    masks = np.arange(1 << n, dtype=np.int64)
    chosen = ((masks[:, None] >> np.arange(n)) & 1).astype(np.float64)
    li = np.array([p.i1 for p in pairs])
    ri = np.array([p.i2 for p in pairs])
    conflict = ((li[:, None] == li[None, :]) |
                (ri[:, None] == ri[None, :])) & ~np.eye(n, dtype=bool)
    infeasible = np.einsum("si,ij,sj->s", chosen,
                           conflict.astype(np.float64), chosen) > 0
    s2 = np.einsum("si,ij,sj->s", chosen, h2, chosen)
    s2[infeasible] = -np.inf
    return float(s2.max())


def _qap_instance(rng):
    n_min = 6
    while True:
        pts = rng.uniform(0, 200, size=(n_min, 2))
        d = np.hypot(pts[:, None, 0] - pts[None, :, 0],
                     pts[:, None, 1] - pts[None, :, 1])
        if (d[~np.eye(n_min, dtype=bool)] > 20).all():
            break
    alphas = rng.uniform(0, 2 * math.pi, n_min)
    latent = [Minutia(x, y, a) for (x, y), a in zip(pts, alphas)]
    rot = rng.uniform(-0.5, 0.5)
    tx, ty = rng.uniform(-20, 20, 2)
    c, s = math.cos(rot), math.sin(rot)
    reference = [Minutia(m.x * c - m.y * s + tx + rng.normal(0, 1.0),
                         m.x * s + m.y * c + ty + rng.normal(0, 1.0),
                         (m.alpha + rot + rng.normal(0, 0.03))
                         % (2 * math.pi))
                 for m in latent]
    k_true = int(rng.integers(3, n_min + 1))
    true_idx = rng.choice(n_min, size=k_true, replace=False)
    pairs = [CandidatePair(int(i), int(i), 1.0) for i in true_idx]
    n_total = int(rng.integers(max(k_true, 6), 13))
    while len(pairs) < n_total:
        i1 = int(rng.integers(n_min))
        i2 = int(rng.integers(n_min))
        if any(p.i1 == i1 and p.i2 == i2 for p in pairs):
            continue
        pairs.append(CandidatePair(i1, i2, float(rng.random())))
    return latent, reference, pairs


class TestCriterion04QapOracle:
    def test_pipeline_reaches_brute_force_fraction(self):
        start = time.time()
        rng = np.random.default_rng(QAP_SEED)
        ratios = []
        for _ in range(100):
            latent, reference, pairs = _qap_instance(rng)
            h2 = build_h2(pairs, latent, reference)
            optimum = _brute_force_best_s2(h2, pairs)
            assert optimum > 0.0  # instances plant a consistent subset
            try:
                y = power_iteration_2(h2)
            except ZeroMatrixError:
                ratios.append(0.0)
                continue
            corr = discretize(y, pairs, 0.2 * float(y.max()))
            kept = {(p.i1, p.i2) for p in corr.pairs}
            indicator = np.array([(p.i1, p.i2) in kept for p in pairs],
                                 dtype=np.float64)
            achieved = float(indicator @ h2 @ indicator)
            ratios.append(achieved / optimum)
        elapsed = time.time() - start
        worst = min(ratios)
        assert worst >= QAP_RATIO_BOUND
        assert elapsed < 60.0
        ok(f"criterion 4: pipeline reached >= {QAP_RATIO_BOUND} of the "
           f"exhaustive optimum on 100 instances (worst {worst:.5f}) "
           f"in {elapsed:.2f}s")


class TestCriterion05SigmoidPoints:
    def test_point_values(self):
        assert truncated_sigmoid(15.0, EUCLIDEAN_PARAMS) == 0.5
        assert truncated_sigmoid(41.0, EUCLIDEAN_PARAMS) == 0.0
        assert abs(truncated_sigmoid(0.0, EUCLIDEAN_PARAMS)
                   - 0.95257) <= 1e-5
        ok("criterion 5: truncated sigmoid point values Z(15)=0.5, "
           "Z(41)=0, Z(0)=0.95257 +/- 1e-5")


class TestCriterion06IdentificationBenchmark:
    FIELD = FieldSpec(width_blocks=20, height_blocks=20, block_size=16)
    N_SUBJECTS = 100
    N_QUERIES = 100

    def test_fused_rank1_dominates(self, tmp_path):
        start = time.time()
        cfg = EngineConfig()
        records = [generate_reference(seed=BENCHMARK_SEED + i,
                                      n_minutiae=36, field_spec=self.FIELD)
                   for i in range(self.N_SUBJECTS)]
        db = enroll(records, tmp_path / "db")
        rng = np.random.default_rng(BENCHMARK_SEED)
        hits = {"mt1": 0, "mt2": 0, "tt": 0, "fused": 0}
        top5_hits = 0
        for j in range(self.N_QUERIES):
            mate = records[j % self.N_SUBJECTS]
            spec = DistortionSpec(
                occlusion_fraction=0.4,
                position_jitter_sigma=3.0,
                angle_jitter_sigma=math.radians(5.0),
                spurious_fraction=0.2,
                rigid_rotation=float(rng.uniform(-math.pi / 6, math.pi / 6)),
                rigid_translation=(float(rng.uniform(-4.0, 4.0)),
                                   float(rng.uniform(-4.0, 4.0))),
                descriptor_noise_sigma=0.1,
                seed=BENCHMARK_SEED + 100_000 + j)
            latent, _ = derive_latent(mate, spec)
            result = search(latent, db, k=self.N_SUBJECTS, config=cfg)
            mate_rank = result.rank_of(mate.subject_id)
            if mate_rank is not None and mate_rank <= 5:
                top5_hits += 1
            rows = [(e.subject_id, e.breakdown) for e in result.entries]
            for key, value in (
                    ("mt1", lambda b: b.s_mt1),
                    ("mt2", lambda b: b.s_mt2),
                    ("tt", lambda b: b.s_tt),
                    ("fused", lambda b: b.s_final)):
                ranked = sorted(rows, key=lambda r: (-value(r[1]), r[0]))
                if ranked[0][0] == mate.subject_id:
                    hits[key] += 1
        rates = {k: v / self.N_QUERIES for k, v in hits.items()}
        elapsed = time.time() - start
        assert rates["fused"] >= rates["mt1"]
        assert rates["fused"] >= rates["mt2"]
        assert rates["fused"] >= rates["tt"]
        assert rates["fused"] >= BENCHMARK_RANK1_BOUND
        assert top5_hits / self.N_QUERIES >= 0.95
        assert elapsed < 600.0
        ok(f"criterion 6: rank-1 fused={rates['fused']:.2f} >= "
           f"mt1={rates['mt1']:.2f}, mt2={rates['mt2']:.2f}, "
           f"tt={rates['tt']:.2f}; >= {BENCHMARK_RANK1_BOUND}; "
           f"top-5 {top5_hits / self.N_QUERIES:.2f} in {elapsed:.0f}s")


class TestCriterion07CmcHandExample:
    def test_hand_example(self):
        def ranked_list(qid, mate, rank, depth=5):
            entries = []
            score = 100.0
            position = 1
            for r in range(1, depth + 1):
                sid = mate if r == rank else f"filler-{qid}-{position}"
                position += 1
                entries.append(CandidateEntry(subject_id=sid, score=score))
                score -= 1.0
            return CandidateList(query_id=qid, entries=entries)

        lists = [ranked_list("q0", "m0", 1), ranked_list("q1", "m1", 2),
                 ranked_list("q2", "m2", 2), ranked_list("q3", "m3", 5)]
        truth = {f"q{i}": f"m{i}" for i in range(4)}
        curve = compute_cmc(lists, truth, k_max=5)
        assert curve.rate(1) == 0.25
        assert curve.rate(2) == 0.75
        assert curve.rate(5) == 1.0
        ok("criterion 7: CMC on mate ranks (1,2,2,5) = "
           "(0.25 @1, 0.75 @2, 1.0 @5)")


class TestCriterion08BordaFusion:
    def test_hand_trace_and_self_fusion(self):
        ours = CandidateList("q", [CandidateEntry("A", 3.0),
                                   CandidateEntry("B", 2.0),
                                   CandidateEntry("C", 1.0)])
        theirs = CandidateList("q", [CandidateEntry("B", 9.0),
                                     CandidateEntry("A", 8.0),
                                     CandidateEntry("C", 7.0)])
        fused = fuse_external_scores(ours, theirs, FusionMode.BORDA)
        assert [e.subject_id for e in fused.entries] == ["A", "B", "C"]
        assert fused.entries[0].score == fused.entries[1].score == 3.0

        rng = np.random.default_rng(8)
        for _ in range(100):
            n = int(rng.integers(1, 40))
            ids = [f"s{k:03d}" for k in range(n)]
            rng.shuffle(ids)
            scores = np.sort(rng.random(n))[::-1]
            lst = CandidateList("q", [CandidateEntry(s, float(v))
                                      for s, v in zip(ids, scores)])
            same = CandidateList("q", [CandidateEntry(e.subject_id, e.score)
                                       for e in lst.entries])
            fused = fuse_external_scores(lst, same, FusionMode.BORDA)
            assert [e.subject_id for e in fused.entries] \
                == [e.subject_id for e in lst.entries]
        ok("criterion 8: Borda hand trace reproduced; self-fusion "
           "rank-preserving on 100 random lists")


class TestCriterion09OrientationEstimator:
    def test_twelve_grating_angles(self):
        worst = 0.0
        for k in range(12):
            angle = 15.0 * k
            h = w = 256
            yy, xx = np.mgrid[0:h, 0:w].astype(float)
            psi = math.radians(angle + 90.0)
            phase = 2 * np.pi / 10.0 * (xx * math.cos(psi)
                                        + yy * math.sin(psi))
            pixels = np.clip(127.5 + 100 * np.cos(phase), 0,
                             255).astype(np.uint8)
            of = estimate_orientation_field(
                GrayImage(pixels=pixels, roi_mask=None), 16)
            interior = np.zeros_like(of.mask)
            interior[1:-1, 1:-1] = of.mask[1:-1, 1:-1]
            assert interior.any()
            t = np.degrees(of.theta[interior])
            err = np.abs(t - angle % 180.0)
            err = np.minimum(err, 180.0 - err)
            mae = float(err.mean())
            worst = max(worst, mae)
            assert mae <= 3.0
        ok(f"criterion 9: orientation MAE <= 3 deg at 12 grating angles "
           f"(worst {worst:.2f} deg)")


class TestCriterion10Determinism:
    def _pipeline(self, root, workers):
        root.mkdir(parents=True, exist_ok=True)
        spec = {
            "occlusion_fraction": 0.25, "position_jitter_sigma": 2.0,
            "angle_jitter_sigma": 0.05, "spurious_fraction": 0.15,
            "rigid_rotation": 0.4, "rigid_translation": [6.0, 6.0],
            "descriptor_noise_sigma": 0.1, "seed": 0,
        }
        (root / "spec.json").write_text(json.dumps(spec))
        assert cli_main([
            "synth", "--out", str(root / "data"), "--subjects", "8",
            "--latents", "8", "--seed", "11", "--spec",
            str(root / "spec.json"), "--n-minutiae", "14",
            "--field-blocks", "14"]) == 0
        assert cli_main([
            "enroll", "--db", str(root / "db"), "--records",
            str(root / "data" / "records")]) == 0
        truth = json.loads((root / "data" / "truth.json").read_text())
        lists_dir = root / "lists"
        lists_dir.mkdir()
        for qid in sorted(truth):
            assert cli_main([
                "search", "--db", str(root / "db"), "--latent",
                str(root / "data" / "latents" / qid), "--top-k", "8",
                "--workers", str(workers), "--out",
                str(lists_dir / f"{qid}.candidates.json")]) == 0
        assert cli_main([
            "eval", "--lists", str(lists_dir), "--truth",
            str(root / "data" / "truth.json"), "--k-max", "8",
            "--out", str(root / "cmc.csv")]) == 0
        lists_bytes = b"".join(
            p.read_bytes() for p in sorted(lists_dir.glob("*.json")))
        return (root / "cmc.csv").read_bytes(), lists_bytes

    def test_pipeline_byte_identical(self, tmp_path):
        outputs = {}
        for workers in (1, 4, 8):
            a = self._pipeline(tmp_path / f"w{workers}-run1", workers)
            b = self._pipeline(tmp_path / f"w{workers}-run2", workers)
            assert a == b  # identical reruns
            outputs[workers] = a
        assert outputs[1] == outputs[4] == outputs[8]
        ok("criterion 10: synth -> enroll -> search -> eval byte-identical "
           "across reruns and worker counts 1/4/8")
