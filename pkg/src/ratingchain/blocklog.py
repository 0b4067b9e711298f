"""Append-only JSON-lines block log with crash recovery.

One block per line. A torn final line (partial write from a crash) is
truncated away with a warning; corruption anywhere else aborts with the
offending height. Hex fields are parsed strictly (lowercase only) so any
on-disk tampering surfaces as a load or replay failure.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

from .ledger import Block
from .wire import WireError, block_from_json, block_to_json

logger = logging.getLogger(__name__)

BLOCK_LOG_NAME = "blocks.jsonl"


class BlockLogCorrupt(Exception):
    def __init__(self, height: int, detail: str):
        super().__init__(f"block log corrupt at height {height}: {detail}")
        self.height = height


class BlockLog:
    def __init__(self, data_dir: str | Path):
        self.path = Path(data_dir) / BLOCK_LOG_NAME
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = None

    def load(self) -> list[Block]:
        """Read all complete records, truncating a torn final line."""
        if not self.path.exists():
            return []
        raw = self.path.read_bytes()
        blocks: list[Block] = []
        offset = 0
        good_end = 0
        height = 1
        while offset < len(raw):
            nl = raw.find(b"\n", offset)
            if nl == -1:
                logger.warning(
                    "block log %s has a torn final record (%d bytes); truncating",
                    self.path, len(raw) - offset,
                )
                break
            line = raw[offset:nl]
            offset = nl + 1
            if not line.strip():
                raise BlockLogCorrupt(height, "blank record")
            try:
                obj = json.loads(line)
                block = block_from_json(obj, strict=True)
            except (json.JSONDecodeError, WireError, ValueError) as exc:
                if offset >= len(raw):
                    # final complete-looking line that does not parse: treat as torn
                    logger.warning("block log %s: unparseable final record; truncating", self.path)
                    break
                raise BlockLogCorrupt(height, str(exc)) from exc
            if block.number != height:
                raise BlockLogCorrupt(height, f"record carries height {block.number}")
            if blocks and block.parent_hash != blocks[-1].block_hash:
                raise BlockLogCorrupt(height, "parent hash does not chain")
            blocks.append(block)
            good_end = offset
            height += 1
        if good_end < len(raw):
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
        return blocks

    def open_append(self) -> None:
        if self._fh is None:
            self._fh = open(self.path, "ab")

    def append(self, block: Block) -> None:
        self.open_append()
        line = json.dumps(block_to_json(block), separators=(",", ":")) + "\n"
        self._fh.write(line.encode("utf-8"))
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
