"""Append-only JSON-lines run logs with an environment fingerprint."""

from __future__ import annotations

import datetime
import json
import platform
import sys
from pathlib import Path
from typing import Optional


def environment_fingerprint() -> dict:
    import numpy

    return {
        "python": sys.version.split()[0],
        "numpy": numpy.__version__,
        "platform": platform.platform(),
        "machine": platform.machine(),
    }


class RunLog:
    """Writes one JSON object per line; the first line snapshots the config."""

    def __init__(self, path, config_snapshot: dict, timestamps: bool = True):
        self.path = Path(path)
        self.timestamps = timestamps
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fp = open(self.path, "w")
        self.write({"event": "start", "config": config_snapshot,
                    "env": environment_fingerprint()})

    def write(self, entry: dict) -> None:
        record = dict(entry)
        if self.timestamps:
            record["ts"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self._fp.write(json.dumps(record, sort_keys=True) + "\n")
        self._fp.flush()

    def close(self) -> None:
        self._fp.close()

    def __enter__(self) -> "RunLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
