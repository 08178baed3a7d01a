"""All-or-nothing output directories.

Files are written into a hidden staging directory next to the target and
moved into place only after every file of a command has been produced.
"""

from __future__ import annotations

import os
import shutil
import tempfile
from pathlib import Path


class Staging:
    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.names: list[str] = []
        self._tmp: Path | None = None

    def __enter__(self) -> "Staging":
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        return self

    def path(self, name: str) -> Path:
        """A staging path for ``name``; it is published on success."""
        if name not in self.names:
            self.names.append(name)
        return self._tmp / name

    def write_text(self, name: str, text: str) -> None:
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def __exit__(self, exc_type, exc, tb) -> None:
        try:
            if exc_type is None:
                for name in self.names:
                    src = self._tmp / name
                    if not src.exists():
                        raise FileNotFoundError(f"staged output {name} was never written")
                for name in self.names:
                    os.replace(self._tmp / name, self.out_dir / name)
        finally:
            shutil.rmtree(self._tmp, ignore_errors=True)

    def published(self) -> list[Path]:
        return [self.out_dir / n for n in self.names]
