"""Result persistence: one directory per run, append-only.

Layout under the data root::

    runs/<run_id>/manifest     key-value text, status and provenance
    runs/<run_id>/result       MeasurementResult document

Every file is written to a temp name and renamed into place, so a
killed process leaves either no file or a complete one, never a torn
write. Manifests found in a non-terminal status on startup belong to a
dead process and are moved to ``failed``.
"""

from __future__ import annotations

import os
import secrets
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .kinds import MeasurementKind
from .results import MeasurementResult, deserialize_result, serialize_result

DATA_DIR_ENV = "NVLAB_DATA_DIR"
DEFAULT_DATA_DIR = "nvlab-data"

STATUS_PENDING = "pending"
STATUS_RUNNING = "running"
STATUS_DONE = "done"
STATUS_FAILED = "failed"
_STATUS_ORDER = (STATUS_PENDING, STATUS_RUNNING, STATUS_DONE, STATUS_FAILED)

# Crockford base32, the usual ULID alphabet: sortable, no ambiguous glyphs.
_B32 = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


def new_run_id(now_ms: "int | None" = None) -> str:
    """26-char sortable id: 48-bit millisecond timestamp + 80 random bits."""
    ms = int(time.time() * 1000) if now_ms is None else now_ms
    value = (ms & (1 << 48) - 1) << 80 | int.from_bytes(secrets.token_bytes(10), "big")
    chars = []
    for _ in range(26):
        chars.append(_B32[value & 31])
        value >>= 5
    return "".join(reversed(chars))


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    kind: str
    seed: int
    mode: str
    status: str
    started: str = ""
    finished: str = ""
    error: str = ""
    result_path: str = ""
    config_text: str = ""
    physics_text: str = ""

    def to_text(self) -> str:
        lines = [
            f"run_id = {self.run_id}",
            f"kind = {self.kind}",
            f"seed = {self.seed}",
            f"mode = {self.mode}",
            f"status = {self.status}",
            f"started = {self.started}",
            f"finished = {self.finished}",
            # A traceback would break the line grammar, keep it one line.
            f"error = {' / '.join(self.error.splitlines())}",
            f"result_path = {self.result_path}",
        ]
        for header, body in (("config", self.config_text), ("physics", self.physics_text)):
            lines.append("")
            lines.append(f"[{header}]")
            if body:
                lines.append(body.rstrip("\n"))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        fields: dict[str, str] = {}
        sections: dict[str, list[str]] = {"config": [], "physics": []}
        current: "list[str] | None" = None
        for line in text.splitlines():
            stripped = line.strip()
            if stripped.startswith("[") and stripped.endswith("]"):
                current = sections.setdefault(stripped[1:-1], [])
                continue
            if current is not None:
                current.append(line)
                continue
            if not stripped:
                continue
            key, _, val = line.partition(" = ")
            fields[key.strip()] = val
        def body(name: str) -> str:
            joined = "\n".join(sections[name]).strip("\n")
            return joined + "\n" if joined else ""
        return cls(
            run_id=fields["run_id"],
            kind=fields["kind"],
            seed=int(fields["seed"]),
            mode=fields["mode"],
            status=fields["status"],
            started=fields.get("started", ""),
            finished=fields.get("finished", ""),
            error=fields.get("error", ""),
            result_path=fields.get("result_path", ""),
            config_text=body("config"),
            physics_text=body("physics"),
        )


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def resolve_data_dir(explicit: "str | Path | None" = None) -> Path:
    """CLI --data flag beats the environment beats ./nvlab-data."""
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get(DATA_DIR_ENV)
    return Path(env) if env else Path(DEFAULT_DATA_DIR)


class RunStore:
    """Run directory management over one data root."""

    def __init__(self, root: "str | Path | None" = None):
        self.root = resolve_data_dir(root)
        self.runs_dir = self.root / "runs"
        self.runs_dir.mkdir(parents=True, exist_ok=True)

    def _dir(self, run_id: str) -> Path:
        return self.runs_dir / run_id

    def _manifest_path(self, run_id: str) -> Path:
        return self._dir(run_id) / "manifest"

    # -- lifecycle -----------------------------------------------------------

    def create_run(
        self,
        kind: MeasurementKind,
        seed: int,
        mode: str,
        config_text: str = "",
        physics_text: str = "",
    ) -> RunManifest:
        run_id = new_run_id()
        manifest = RunManifest(
            run_id=run_id, kind=kind.value, seed=seed, mode=mode,
            status=STATUS_RUNNING, started=_utc_now(),
            config_text=config_text, physics_text=physics_text,
        )
        self._dir(run_id).mkdir(parents=True, exist_ok=False)
        _atomic_write(self._manifest_path(run_id), manifest.to_text())
        return manifest

    def _advance(self, manifest: RunManifest, **changes) -> RunManifest:
        updated = replace(manifest, **changes)
        terminal = manifest.status in (STATUS_DONE, STATUS_FAILED)
        if terminal or _STATUS_ORDER.index(updated.status) < _STATUS_ORDER.index(manifest.status):
            raise ValueError(
                f"status cannot move {manifest.status} -> {updated.status}"
            )
        _atomic_write(self._manifest_path(manifest.run_id), updated.to_text())
        return updated

    def finish_run(self, manifest: RunManifest, result: MeasurementResult) -> RunManifest:
        result_path = self._dir(manifest.run_id) / "result"
        _atomic_write(result_path, serialize_result(result))
        return self._advance(
            manifest, status=STATUS_DONE, finished=_utc_now(),
            result_path=str(result_path),
        )

    def fail_run(self, manifest: RunManifest, error: str) -> RunManifest:
        return self._advance(
            manifest, status=STATUS_FAILED, finished=_utc_now(), error=error
        )

    # -- queries -------------------------------------------------------------

    def list_runs(self) -> list[RunManifest]:
        out = []
        for entry in sorted(self.runs_dir.iterdir()):
            manifest_path = entry / "manifest"
            if manifest_path.is_file():
                out.append(RunManifest.from_text(manifest_path.read_text(encoding="utf-8")))
        return out

    def load_manifest(self, run_id: str) -> RunManifest:
        path = self._manifest_path(run_id)
        if not path.is_file():
            raise FileNotFoundError(f"no run {run_id!r} under {self.runs_dir}")
        return RunManifest.from_text(path.read_text(encoding="utf-8"))

    def load_result(self, run_id: str) -> MeasurementResult:
        path = self._dir(run_id) / "result"
        if not path.is_file():
            raise FileNotFoundError(f"run {run_id!r} has no result file")
        return deserialize_result(path.read_text(encoding="utf-8"))

    def recover_interrupted(self) -> list[RunManifest]:
        """Mark runs left in a non-terminal status by a dead process."""
        recovered = []
        for manifest in self.list_runs():
            if manifest.status in (STATUS_PENDING, STATUS_RUNNING):
                recovered.append(self.fail_run(manifest, "interrupted by shutdown"))
        return recovered
