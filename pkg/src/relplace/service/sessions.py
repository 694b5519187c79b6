"""In-memory session state for the interactive placement loop."""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from ..scenes.catalog import Template
from ..scenes.generate import GenConfig, table_rect
from ..scenes.types import SceneSpec
from ..spatial.model import PlacementMaps
from .parsing import ParsedInstruction

DEFAULT_DEPTH_SCALE = 0.7


def empty_scene(image_size: int = 96, seed: int = 0) -> SceneSpec:
    cfg = GenConfig(width=image_size, height=image_size)
    table = table_rect(cfg, DEFAULT_DEPTH_SCALE)
    return SceneSpec(width=image_size, height=image_size, table_region=table,
                     objects=[], seed=seed, depth_scale=DEFAULT_DEPTH_SCALE)


@dataclass
class HistoryEntry:
    instruction: str
    parsed: dict
    placement: Optional[List[int]] = None
    rating: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"instruction": self.instruction, "parsed": self.parsed,
                "placement": self.placement, "rating": self.rating}


@dataclass
class Session:
    id: str
    scene: SceneSpec
    pending_subject: Optional[Template] = None
    history: List[HistoryEntry] = field(default_factory=list)
    last_parsed: Optional[ParsedInstruction] = None
    last_maps: Optional[PlacementMaps] = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """Sessions are in-memory; mutations per session are serialized by its
    lock. Optional JSON-lines persistence appends an event per mutation."""

    def __init__(self, image_size: int = 96, persist_dir=None):
        self.image_size = image_size
        self.persist_dir = Path(persist_dir) if persist_dir else None
        self._sessions: Dict[str, Session] = {}
        self._store_lock = threading.Lock()
        if self.persist_dir:
            self.persist_dir.mkdir(parents=True, exist_ok=True)

    def create(self) -> Session:
        session = Session(id=uuid.uuid4().hex[:12],
                          scene=empty_scene(self.image_size))
        with self._store_lock:
            self._sessions[session.id] = session
        self.persist(session, {"event": "created"})
        return session

    def get(self, session_id: str) -> Optional[Session]:
        with self._store_lock:
            return self._sessions.get(session_id)

    def persist(self, session: Session, event: dict) -> None:
        if not self.persist_dir:
            return
        path = self.persist_dir / f"{session.id}.jsonl"
        with open(path, "a") as fp:
            fp.write(json.dumps({"session": session.id, **event}, sort_keys=True) + "\n")
