"""Command-line front end.

Subcommands: extract, enroll, search, eval, fuse, synth, sfs.  Exit codes:
0 success, 2 input error (bad arguments, unreadable or malformed inputs),
3 data-integrity error (corrupt templates, duplicate subjects, missing
truth entries).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import EngineConfig
from .database import CandidateList, enroll, open_db, search
from .descriptors import (CATALOG_IDS, DEFAULT_PATCH_TYPES,
                          compute_descriptor)
from .errors import (DuplicateSubjectError, LatentMatchError,
                     MissingTruthError, QueryMismatchError,
                     TemplateFormatError)
from .evaluation import (FusionMode, SfsBenchmark, compute_cmc,
                         fuse_external_scores, sfs_patch_selection)
from .imaging import (estimate_orientation_field, extract_patch,
                      latent_virtual_minutiae, load_gray_image,
                      reference_virtual_minutiae)
from .model import (Minutia, MinutiaKind, MinutiaeTemplate, TemplateVariant,
                    TextureSide, TextureTemplate)
from .synth import (DistortionSpec, FieldSpec, LatentQuery,
                    derive_latent, generate_reference)
from .template_io import load_template, save_template

_INTEGRITY_ERRORS = (TemplateFormatError, DuplicateSubjectError,
                     MissingTruthError, QueryMismatchError)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTEGRITY = 3


def _load_config(path: str | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    return EngineConfig.load(path)


def _load_latent(prefix: Path) -> LatentQuery:
    mt1 = load_template(prefix.with_suffix(".mt1"))
    mt2 = load_template(prefix.with_suffix(".mt2"))
    tt = load_template(prefix.with_suffix(".tt"))
    return LatentQuery(query_id=mt1.source_id, minutiae_template_1=mt1,
                       minutiae_template_2=mt2, texture_template=tt)


# --------------------------------------------------------------------------
# subcommands


def _cmd_extract(args) -> int:
    img = load_gray_image(args.image, args.mask)
    field = estimate_orientation_field(img, block_size=args.block_size)
    patch_types = tuple(args.patch_types.split(",")) if args.patch_types \
        else DEFAULT_PATCH_TYPES

    if args.kind == "latent":
        virtual = latent_virtual_minutiae(field)
        side = TextureSide.LATENT
    else:
        virtual = reference_virtual_minutiae(field)
        side = TextureSide.REFERENCE

    def descriptor_for(m):
        patches = [extract_patch(img, m, pt) for pt in patch_types]
        return compute_descriptor(patches, patch_types)

    out_prefix = Path(args.out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    source_id = args.source_id or out_prefix.stem

    texture = TextureTemplate(
        virtual_minutiae=virtual,
        descriptors=[descriptor_for(m) for m in virtual],
        source_id=source_id, side=side,
        width_px=field.width_px, height_px=field.height_px,
        block_size=field.block_size)
    save_template(texture, out_prefix.with_suffix(".tt"))
    written = [str(out_prefix.with_suffix(".tt"))]

    if args.minutiae:
        points = json.loads(Path(args.minutiae).read_text(encoding="utf-8"))
        minutiae = [Minutia(p["x"], p["y"], p["alpha"], MinutiaKind.TRUE)
                    for p in points]
        variant = TemplateVariant.REFERENCE if args.kind == "reference" \
            else TemplateVariant.LATENT_1
        template = MinutiaeTemplate(
            minutiae=minutiae,
            descriptors=[descriptor_for(m) for m in minutiae],
            orientation_field=field, source_id=source_id, variant=variant)
        save_template(template, out_prefix.with_suffix(".mt"))
        written.append(str(out_prefix.with_suffix(".mt")))

    print("\n".join(written))
    return EXIT_OK


def _cmd_enroll(args) -> int:
    records_dir = Path(args.records)
    mt_paths = sorted(records_dir.glob("*.mt"))
    if not mt_paths:
        print(f"no *.mt templates under {records_dir}", file=sys.stderr)
        return EXIT_INPUT
    from .model import SubjectRecord
    records = []
    for mt_path in mt_paths:
        tt_path = mt_path.with_suffix(".tt")
        if not tt_path.exists():
            print(f"missing texture template {tt_path}", file=sys.stderr)
            return EXIT_INPUT
        mt = load_template(mt_path)
        tt = load_template(tt_path)
        records.append(SubjectRecord(subject_id=mt.source_id,
                                     minutiae_template=mt,
                                     texture_template=tt))
    db = enroll(records, args.db)
    print(f"enrolled {len(records)} subjects; db now holds {len(db)}")
    return EXIT_OK


def _cmd_search(args) -> int:
    db = open_db(args.db)
    latent = _load_latent(Path(args.latent))
    config = _load_config(args.config)
    result = search(latent, db, k=args.top_k, config=config,
                    workers=args.workers)
    out = Path(args.out) if args.out else None
    text = result.to_json()
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if args.scores_jsonl:
        lines = [e.breakdown.to_json_line(result.query_id, e.subject_id)
                 for e in result.entries if e.breakdown is not None]
        Path(args.scores_jsonl).write_text("\n".join(lines) + "\n",
                                           encoding="utf-8")
    return EXIT_OK


def _cmd_eval(args) -> int:
    truth = json.loads(Path(args.truth).read_text(encoding="utf-8"))
    list_paths = sorted(Path(args.lists).glob("*.candidates.json"))
    if not list_paths:
        print(f"no *.candidates.json under {args.lists}", file=sys.stderr)
        return EXIT_INPUT
    lists = [CandidateList.from_json(p.read_text(encoding="utf-8"))
             for p in list_paths]
    curve = compute_cmc(lists, truth, k_max=args.k_max)
    csv_text = curve.to_csv()
    target = args.cmc or args.out
    if target:
        Path(target).write_text(csv_text, encoding="utf-8")
    print(csv_text, end="")
    return EXIT_OK


def _cmd_fuse(args) -> int:
    ours = CandidateList.from_json(Path(args.ours).read_text(encoding="utf-8"))
    theirs = CandidateList.from_json(
        Path(args.theirs).read_text(encoding="utf-8"))
    mode = FusionMode.SCORE_EQUAL_WEIGHT if args.mode == "score" \
        else FusionMode.BORDA
    fused = fuse_external_scores(ours, theirs, mode)
    text = fused.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def _cmd_synth(args) -> int:
    out_dir = Path(args.out)
    records_dir = out_dir / "records"
    latents_dir = out_dir / "latents"
    records_dir.mkdir(parents=True, exist_ok=True)
    latents_dir.mkdir(parents=True, exist_ok=True)

    if args.spec:
        spec_base = DistortionSpec.from_dict(
            json.loads(Path(args.spec).read_text(encoding="utf-8")))
    else:
        spec_base = DistortionSpec()
    field_spec = FieldSpec(width_blocks=args.field_blocks,
                           height_blocks=args.field_blocks)

    truth: dict[str, str] = {}
    records = []
    for i in range(args.subjects):
        record = generate_reference(seed=args.seed + i,
                                    n_minutiae=args.n_minutiae,
                                    field_spec=field_spec)
        records.append(record)
        save_template(record.minutiae_template,
                      records_dir / f"{record.subject_id}.mt")
        save_template(record.texture_template,
                      records_dir / f"{record.subject_id}.tt")

    import numpy as np
    rng = np.random.default_rng(args.seed + 10_000_019)
    for j in range(args.latents):
        record = records[j % len(records)]
        spec = DistortionSpec(
            occlusion_fraction=spec_base.occlusion_fraction,
            position_jitter_sigma=spec_base.position_jitter_sigma,
            angle_jitter_sigma=spec_base.angle_jitter_sigma,
            spurious_fraction=spec_base.spurious_fraction,
            rigid_rotation=float(rng.uniform(-spec_base.rigid_rotation,
                                             spec_base.rigid_rotation))
            if spec_base.rigid_rotation else 0.0,
            rigid_translation=tuple(
                rng.uniform(-t, t) if t else 0.0
                for t in spec_base.rigid_translation),
            descriptor_noise_sigma=spec_base.descriptor_noise_sigma,
            seed=args.seed + 20_000_003 + j)
        latent, gt = derive_latent(record, spec, query_id=f"Q{j:05d}")
        prefix = latents_dir / latent.query_id
        save_template(latent.minutiae_template_1, prefix.with_suffix(".mt1"))
        save_template(latent.minutiae_template_2, prefix.with_suffix(".mt2"))
        save_template(latent.texture_template, prefix.with_suffix(".tt"))
        (latents_dir / f"{latent.query_id}.truth.json").write_text(
            gt.to_json() + "\n", encoding="utf-8")
        truth[latent.query_id] = record.subject_id

    (out_dir / "truth.json").write_text(
        json.dumps(truth, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {args.subjects} subjects and {args.latents} latents "
          f"under {out_dir}")
    return EXIT_OK


def _cmd_sfs(args) -> int:
    bench_dir = Path(args.benchmark)
    truth = json.loads((bench_dir / "truth.json").read_text(encoding="utf-8"))
    records_dir = bench_dir / "records"
    latents_dir = bench_dir / "latents"
    from .model import SubjectRecord
    records = []
    for mt_path in sorted(records_dir.glob("*.mt")):
        mt = load_template(mt_path)
        tt = load_template(mt_path.with_suffix(".tt"))
        records.append(SubjectRecord(subject_id=mt.source_id,
                                     minutiae_template=mt,
                                     texture_template=tt))
    queries = [_load_latent(p.with_suffix(""))
               for p in sorted(latents_dir.glob("*.mt1"))]
    benchmark = SfsBenchmark(queries=queries, records=records, truth=truth,
                             config=_load_config(args.config))
    if args.catalog:
        catalog = tuple(args.catalog.split(","))
    elif queries and queries[0].minutiae_template_1.descriptors:
        # default to the types the benchmark templates actually carry
        catalog = queries[0].minutiae_template_1.descriptors[0].patch_type_ids
    else:
        catalog = CATALOG_IDS
    steps = sfs_patch_selection(benchmark, catalog, max_k=args.max_k)
    lines = ["step,patch_type,rank1_accuracy"]
    for i, (pt, acc) in enumerate(steps, start=1):
        lines.append(f"{i},{pt},{acc!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentmatch",
        description="Latent-to-reference fingerprint identification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="image + ROI mask -> templates")
    p.add_argument("--image", required=True)
    p.add_argument("--mask")
    p.add_argument("--kind", choices=("latent", "reference"),
                   required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--minutiae",
                   help="JSON list of {x, y, alpha} for a minutiae template")
    p.add_argument("--block-size", type=int, default=16)
    p.add_argument("--patch-types", help="comma-separated patch type ids")
    p.add_argument("--source-id")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("enroll", help="enroll subject records into a db")
    p.add_argument("--db", required=True)
    p.add_argument("--records", required=True,
                   help="directory of <subject>.mt/<subject>.tt pairs")
    p.set_defaults(func=_cmd_enroll)

    p = sub.add_parser("search", help="1:N identification search")
    p.add_argument("--db", required=True)
    p.add_argument("--latent", required=True,
                   help="path prefix of <latent>.mt1/.mt2/.tt")
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config")
    p.add_argument("--out", help="write the candidate list JSON here")
    p.add_argument("--scores-jsonl",
                   help="write per-subject score breakdowns as JSON lines")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("eval", help="compute a CMC curve (CSV: rank,rate)")
    p.add_argument("--lists", required=True,
                   help="directory of *.candidates.json files")
    p.add_argument("--truth", required=True,
                   help="JSON mapping query_id -> subject_id")
    p.add_argument("--k-max", type=int, default=20)
    p.add_argument("--cmc", help="write the CMC CSV here")
    p.add_argument("--out", help="alias for --cmc")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("fuse", help="fuse two candidate lists")
    p.add_argument("--ours", required=True)
    p.add_argument("--theirs", required=True)
    p.add_argument("--mode", choices=("score", "borda"), required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("synth", help="generate synthetic subjects + latents")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--latents", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec",
                   help="JSON distortion spec; rigid_rotation and "
                        "rigid_translation act as ranges, sampled "
                        "uniformly in [-value, value] per latent")
    p.add_argument("--n-minutiae", type=int, default=36)
    p.add_argument("--field-blocks", type=int, default=24)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sfs", help="sequential forward patch-type selection")
    p.add_argument("--benchmark", required=True,
                   help="directory produced by `latentmatch synth`")
    p.add_argument("--max-k", type=int, default=3)
    p.add_argument("--catalog", help="comma-separated candidate patch types")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sfs)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INTEGRITY_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except LatentMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
