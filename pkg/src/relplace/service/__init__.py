"""HTTP service for the interactive placement loop."""

from .app import create_app, create_app_from_paths
from .parsing import LEXICON, ParsedInstruction, ParseError, parse_instruction
from .sessions import Session, SessionStore, empty_scene

__all__ = ["create_app", "create_app_from_paths", "LEXICON", "ParsedInstruction",
           "ParseError", "parse_instruction", "Session", "SessionStore",
           "empty_scene"]
