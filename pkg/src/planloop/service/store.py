"""Filesystem session store: one directory per session, crash-safe writes.

Layout under the store root::

    demos/<demo_id>.jsonl
    sessions/<session_id>/record.json     # metadata + sidecar + version meta
    sessions/<session_id>/versions/NNN.xml
    sessions/<session_id>/discarded/NNN.xml

Every mutation rewrites record.json via write-temp-then-rename, so a crash
leaves the previous committed state intact. Unreadable records are renamed to
``<id>.quarantined`` and reported; the service stays up.
"""
from __future__ import annotations

import json
import os
import shutil
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..btree import BehaviorTree, from_xml, to_xml
from ..demo import Demonstration, load_demonstration
from ..errors import StoreCorruptError, StoreError
from ..refiner import PlanVersion, RefinementSession, session_from_dict, session_to_dict


@dataclass
class SessionRecord:
    session_id: str
    demo_id: str
    session: RefinementSession
    created: float
    updated: float
    config: dict = field(default_factory=dict)


def _default_id_factory() -> str:
    return uuid.uuid4().hex[:12]


class SessionStore:
    def __init__(self, root, clock=time.time, id_factory=_default_id_factory):
        self.root = Path(root)
        self.clock = clock
        self.id_factory = id_factory
        (self.root / "demos").mkdir(parents=True, exist_ok=True)
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._pending: dict[str, bool] = {}
        self._guard = threading.Lock()

    # -- demonstrations ----------------------------------------------------

    def add_demonstration(self, text: str) -> str:
        demo_id = self.id_factory()
        path = self.root / "demos" / f"{demo_id}.jsonl"
        self._atomic_write(path, text)
        load_demonstration(path)  # validate; raises on malformed input
        return demo_id

    def demo_path(self, demo_id: str) -> Path:
        path = self.root / "demos" / f"{demo_id}.jsonl"
        if not path.exists():
            raise KeyError(demo_id)
        return path

    def load_demo(self, demo_id: str) -> Demonstration:
        return load_demonstration(self.demo_path(demo_id))

    # -- sessions ----------------------------------------------------------

    def create_session(self, demo_id: str, session: RefinementSession, config: dict) -> SessionRecord:
        self.demo_path(demo_id)
        now = self.clock()
        record = SessionRecord(
            session_id=self.id_factory(), demo_id=demo_id, session=session,
            created=now, updated=now, config=config,
        )
        self.save(record)
        return record

    def session_ids(self) -> list[str]:
        return sorted(
            p.name for p in (self.root / "sessions").iterdir()
            if p.is_dir() and not p.name.endswith(".quarantined")
        )

    def _session_dir(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id

    def save(self, record: SessionRecord) -> None:
        sdir = self._session_dir(record.session_id)
        (sdir / "versions").mkdir(parents=True, exist_ok=True)
        (sdir / "discarded").mkdir(parents=True, exist_ok=True)
        record.updated = self.clock()
        payload = session_to_dict(record.session)
        for kind in ("versions", "discarded"):
            rows = payload[kind]
            for i, row in enumerate(rows):
                self._atomic_write(sdir / kind / f"{i:03d}.xml", row.pop("xml"))
            # drop stale files from restored/truncated lineages
            for stale in sorted((sdir / kind).glob("*.xml"))[len(rows):]:
                stale.unlink()
        meta = {
            "session_id": record.session_id,
            "demo_id": record.demo_id,
            "created": record.created,
            "updated": record.updated,
            "config": record.config,
            "session": payload,
        }
        self._atomic_write(sdir / "record.json", json.dumps(meta, sort_keys=True, indent=1))

    def load(self, session_id: str) -> SessionRecord:
        sdir = self._session_dir(session_id)
        if not sdir.is_dir():
            raise KeyError(session_id)
        try:
            meta = json.loads((sdir / "record.json").read_text(encoding="utf-8"))
            payload = meta["session"]
            for kind in ("versions", "discarded"):
                for i, row in enumerate(payload[kind]):
                    row["xml"] = (sdir / kind / f"{i:03d}.xml").read_text(encoding="utf-8")
            session = session_from_dict(payload)
            return SessionRecord(
                session_id=meta["session_id"], demo_id=meta["demo_id"], session=session,
                created=meta["created"], updated=meta["updated"], config=meta.get("config", {}),
            )
        except (OSError, KeyError, ValueError) as exc:
            self._quarantine(session_id)
            raise StoreCorruptError(f"session {session_id} is corrupt and was quarantined: {exc}") from exc

    def _quarantine(self, session_id: str) -> None:
        sdir = self._session_dir(session_id)
        target = sdir.with_name(sdir.name + ".quarantined")
        if sdir.exists():
            if target.exists():
                shutil.rmtree(target)
            os.replace(sdir, target)

    # -- concurrency -------------------------------------------------------

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def set_pending(self, session_id: str, value: bool) -> None:
        with self._guard:
            self._pending[session_id] = value

    def is_pending(self, session_id: str) -> bool:
        with self._guard:
            return self._pending.get(session_id, False)

    # -- plumbing ----------------------------------------------------------

    @staticmethod
    def _atomic_write(path: Path, text: str) -> None:
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
