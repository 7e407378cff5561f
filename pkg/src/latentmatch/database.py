"""Reference database persistence and 1:N identification search.

A database is a directory holding one minutiae-template file and one
texture-template file per subject plus a canonical ``manifest.json``.
Search compares a latent's three templates against every enrolled subject
and returns a ranked candidate list; results are deterministic for any
worker count because subjects are scored independently and merged by a
total order (score descending, subject id ascending).
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import EngineConfig
from .errors import DuplicateSubjectError, EmptyDbError, TemplateFormatError
from .model import SubjectRecord
from .scoring import ScoreBreakdown, score_subject
from .synth import LatentQuery
from .template_io import load_template, save_template

MANIFEST_NAME = "manifest.json"


@dataclass
class ReferenceDb:
    """Handle to an on-disk reference database."""

    path: Path
    subjects: dict[str, dict[str, str]]  # subject_id -> {"minutiae", "texture"}

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def subject_ids(self) -> list[str]:
        return sorted(self.subjects)

    def manifest_text(self) -> str:
        return json.dumps({"version": 1, "subjects": self.subjects},
                          sort_keys=True, indent=0)

    def load_record(self, subject_id: str) -> SubjectRecord:
        cache = getattr(self, "_record_cache", None)
        if cache is None:
            cache = {}
            self._record_cache = cache
        if subject_id not in cache:
            entry = self.subjects[subject_id]
            mt = load_template(self.path / entry["minutiae"])
            tt = load_template(self.path / entry["texture"])
            cache[subject_id] = SubjectRecord(
                subject_id=subject_id, minutiae_template=mt,
                texture_template=tt)
        return cache[subject_id]


def enroll(records, db_path) -> ReferenceDb:
    """Persist subject records into a (new or existing) database directory.

    Raises DuplicateSubjectError when a subject id repeats, either within
    the batch or against already-enrolled subjects.
    """
    db_path = Path(db_path)
    db_path.mkdir(parents=True, exist_ok=True)
    manifest_path = db_path / MANIFEST_NAME
    if manifest_path.exists():
        db = open_db(db_path)
        subjects = dict(db.subjects)
    else:
        subjects = {}

    for record in records:
        sid = record.subject_id
        if not sid or any(c in sid for c in "/\\") or sid in (".", ".."):
            raise ValueError(f"subject id {sid!r} is not a safe file name")
        if sid in subjects:
            raise DuplicateSubjectError(f"subject {sid!r} already enrolled")
        mt_name = f"{sid}.mt"
        tt_name = f"{sid}.tt"
        save_template(record.minutiae_template, db_path / mt_name)
        save_template(record.texture_template, db_path / tt_name)
        subjects[sid] = {"minutiae": mt_name, "texture": tt_name}

    db = ReferenceDb(path=db_path, subjects=subjects)
    manifest_path.write_text(db.manifest_text(), encoding="utf-8")
    return db


def open_db(db_path) -> ReferenceDb:
    db_path = Path(db_path)
    manifest_path = db_path / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest in {db_path}")
    payload = json.loads(manifest_path.read_text(encoding="utf-8"))
    if payload.get("version") != 1:
        raise TemplateFormatError(
            f"unsupported manifest version {payload.get('version')}")
    subjects = payload["subjects"]
    for sid, entry in subjects.items():
        for key in ("minutiae", "texture"):
            if not (db_path / entry[key]).exists():
                raise TemplateFormatError(
                    f"manifest entry {sid!r} points to missing file "
                    f"{entry[key]!r}")
    return ReferenceDb(path=db_path, subjects=subjects)


# --------------------------------------------------------------------------
# 1:N search


@dataclass
class CandidateEntry:
    subject_id: str
    score: float
    breakdown: ScoreBreakdown | None = None

    def as_dict(self) -> dict:
        d = {"subject_id": self.subject_id, "score": self.score}
        if self.breakdown is not None:
            d["breakdown"] = self.breakdown.as_dict()
        return d


@dataclass
class CandidateList:
    """Ranked search output: score descending, ties by subject id."""

    query_id: str
    entries: list[CandidateEntry]

    def __len__(self) -> int:
        return len(self.entries)

    def rank_of(self, subject_id: str) -> int | None:
        """1-based rank of a subject, or None when absent."""
        for rank, entry in enumerate(self.entries, start=1):
            if entry.subject_id == subject_id:
                return rank
        return None

    def to_json(self) -> str:
        return json.dumps({
            "query_id": self.query_id,
            "entries": [e.as_dict() for e in self.entries],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CandidateList":
        d = json.loads(text)
        entries = []
        for e in d["entries"]:
            breakdown = ScoreBreakdown.from_dict(e["breakdown"]) \
                if "breakdown" in e else None
            entries.append(CandidateEntry(subject_id=e["subject_id"],
                                          score=e["score"],
                                          breakdown=breakdown))
        return cls(query_id=d["query_id"], entries=entries)


def _score_ids(db: ReferenceDb, subject_ids, latent, config
               ) -> list[tuple[str, ScoreBreakdown]]:
    out = []
    for sid in subject_ids:
        record = db.load_record(sid)
        breakdown = score_subject(latent.minutiae_template_1,
                                  latent.minutiae_template_2,
                                  latent.texture_template, record, config)
        out.append((sid, breakdown))
    return out


def _score_chunk(args) -> list[tuple[str, ScoreBreakdown]]:
    db_path, subject_ids, latent, config = args
    return _score_ids(open_db(db_path), subject_ids, latent, config)


def search(latent: LatentQuery, db: ReferenceDb, k: int,
           config: EngineConfig | None = None, workers: int = 1
           ) -> CandidateList:
    """Compare a latent against every enrolled subject; return the top k.

    The candidate list carries the full score breakdown per subject and is
    identical for any ``workers`` value.
    """
    if config is None:
        config = EngineConfig()
    ids = db.subject_ids
    if not ids:
        raise EmptyDbError(f"database {db.path} has no subjects")

    scored: list[tuple[str, ScoreBreakdown]] = []
    if workers <= 1:
        scored = _score_ids(db, ids, latent, config)
    else:
        n_chunks = min(len(ids), workers * 4)
        chunks = [ids[i::n_chunks] for i in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_score_chunk,
                                 [(db.path, chunk, latent, config)
                                  for chunk in chunks]):
                scored.extend(part)

    scored.sort(key=lambda item: (-item[1].s_final, item[0]))
    entries = [CandidateEntry(subject_id=sid, score=b.s_final, breakdown=b)
               for sid, b in scored[:k]]
    return CandidateList(query_id=latent.query_id, entries=entries)
