"""Keyword-spotting instruction parser.

Fixed relation lexicon, longest keyword match first so "on top" beats "on"
and "in front" beats "in". Object names are matched with word boundaries:
the subject from the text before the relation keyword (catalog names), the
reference from the text after it (scene object names).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from ..scenes.catalog import SubjectCatalog
from ..scenes.types import SceneSpec

LEXICON: Dict[str, Tuple[str, ...]] = {
    "inside": ("inside", "in", "into"),
    "left": ("left",),
    "right": ("right",),
    "in_front": ("in front", "front"),
    "behind": ("behind", "back"),
    "on_top": ("on top", "on", "onto", "top"),
}

_KEYWORDS = sorted(((kw, rel) for rel, kws in LEXICON.items() for kw in kws),
                   key=lambda item: (-len(item[0]), item[0]))


class ParseError(ValueError):
    def __init__(self, kind: str, message: str, detail: Optional[dict] = None):
        self.kind = kind
        self.detail = detail or {}
        super().__init__(message)

    def payload(self) -> dict:
        return {"error": self.kind, "message": str(self), **self.detail}


@dataclass
class ParsedInstruction:
    relation: str
    reference_name: str
    subject_name: str
    raw_text: str

    def to_dict(self) -> dict:
        return {"relation": self.relation, "reference_name": self.reference_name,
                "subject_name": self.subject_name, "raw_text": self.raw_text}


def _find_relation(text: str) -> Tuple[str, int, int]:
    for keyword, relation in _KEYWORDS:
        m = re.search(rf"\b{re.escape(keyword)}\b", text)
        if m:
            return relation, m.start(), m.end()
    raise ParseError("unrecognized_relation",
                     "no spatial relation keyword found",
                     {"lexicon": {rel: list(kws) for rel, kws in LEXICON.items()}})


def _mentions(segment: str, names: List[str]) -> List[Tuple[int, str]]:
    """(position, name) for every whole-word name occurrence, longest first
    so 'red box' wins over 'box' on the same span."""
    found: List[Tuple[int, str]] = []
    claimed: List[Tuple[int, int]] = []
    for name in sorted(set(names), key=len, reverse=True):
        for m in re.finditer(rf"\b{re.escape(name)}\b", segment):
            span = (m.start(), m.end())
            if any(s < span[1] and span[0] < e for s, e in claimed):
                continue
            claimed.append(span)
            found.append((m.start(), name))
    return sorted(found)


def parse_instruction(text: str, scene: SceneSpec, catalog: SubjectCatalog,
                      pending_subject_name: Optional[str] = None) -> ParsedInstruction:
    """Deterministic lowercase keyword scan; raises ParseError with a
    structured reason on every failure path."""
    if not text or not text.strip():
        raise ParseError("empty_instruction", "instruction text is empty")
    lowered = text.lower()
    relation, start, end = _find_relation(lowered)
    before = lowered[:start]
    after = lowered[end:]

    scene_names = [o.name.lower() for o in scene.objects if o.name]
    scene_vocab = _vocabulary(scene_names)
    # subject: a catalog item named before the keyword ("put the can ...");
    # falls back to the object already on the gripper
    subject_pool = catalog.names() + list(scene_vocab)
    subj_mentions = _mentions(before, subject_pool)
    if subj_mentions:
        subject_name = subj_mentions[-1][1]  # closest to the keyword
    elif pending_subject_name:
        subject_name = pending_subject_name
    else:
        raise ParseError("unknown_object", "could not find a subject object",
                         {"candidates": catalog.names()})

    ref_mentions = _mentions(after, list(scene_vocab))
    if not ref_mentions:
        raise ParseError("unknown_object", "could not find a reference object",
                         {"candidates": sorted(set(scene_names))})
    reference_name = ref_mentions[0][1]
    matches = [o for o in scene.objects if _name_matches(o.name.lower(), reference_name)]
    if len(matches) > 1:
        raise ParseError("ambiguous_object",
                         f"'{reference_name}' matches {len(matches)} objects",
                         {"candidates": [o.name for o in matches]})
    if not matches:
        raise ParseError("unknown_object", f"no scene object named '{reference_name}'",
                         {"candidates": sorted(set(scene_names))})
    return ParsedInstruction(relation=relation, reference_name=matches[0].name,
                             subject_name=subject_name, raw_text=text)


def _vocabulary(names: List[str]) -> List[str]:
    """Full names plus their component words ('red box' is also 'box')."""
    vocab = set()
    for name in names:
        vocab.add(name)
        for word in name.split():
            if len(word) >= 3:
                vocab.add(word)
    return sorted(vocab)


def _name_matches(full_name: str, mention: str) -> bool:
    return full_name == mention or re.search(rf"\b{re.escape(mention)}\b", full_name) is not None


def resolve_reference(scene: SceneSpec, name: str):
    lowered = name.lower()
    matches = [o for o in scene.objects if _name_matches(o.name.lower(), lowered)]
    if len(matches) != 1:
        raise ParseError("ambiguous_object" if matches else "unknown_object",
                         f"'{name}' resolves to {len(matches)} objects",
                         {"candidates": [o.name for o in matches] or
                          [o.name for o in scene.objects]})
    return matches[0]
