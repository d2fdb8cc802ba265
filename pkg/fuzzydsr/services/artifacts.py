from __future__ import annotations

import logging
import os
import tempfile
from pathlib import Path
from typing import Protocol

import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)


class ArtifactError(RuntimeError):
    pass


def atomic_write_text(path: Path, content: str) -> None:
    """Write through a sibling temp file and rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(content)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


class ArtifactStore(Protocol):
    def write_text(self, *, key: str, content: str) -> Path: ...

    def write_model(self, *, key: str, model: BaseModel) -> Path: ...

    def write_frame(self, *, key: str, frame: pd.DataFrame) -> Path: ...

    def read_text(self, *, key: str) -> str: ...

    def exists(self, *, key: str) -> bool: ...

    def path(self, *, key: str) -> Path: ...


class LocalArtifactStore:
    def __init__(self, root: Path | str):
        self.root = Path(root)

    def path(self, *, key: str) -> Path:
        return self.root / key

    def write_text(self, *, key: str, content: str) -> Path:
        target = self.path(key=key)
        try:
            atomic_write_text(target, content)
        except OSError as exc:
            raise ArtifactError(f"Could not write {target}: {exc}") from exc
        logger.debug("artifact_written path=%s bytes=%s", target, len(content.encode("utf-8")))
        return target

    def write_model(self, *, key: str, model: BaseModel) -> Path:
        return self.write_text(key=key, content=model.model_dump_json(indent=2) + "\n")

    def write_frame(self, *, key: str, frame: pd.DataFrame) -> Path:
        return self.write_text(key=key, content=frame.to_csv(index=False, lineterminator="\n"))

    def read_text(self, *, key: str) -> str:
        target = self.path(key=key)
        if not target.exists():
            raise ArtifactError(f"Missing artifact {target}")
        return target.read_text(encoding="utf-8")

    def exists(self, *, key: str) -> bool:
        return self.path(key=key).exists()


def create_artifact_store(root: Path | str) -> ArtifactStore:
    return LocalArtifactStore(root)
