"""Session-oriented HTTP service over the library, engine, and composer.

One design = one strictly serialized mutation stream guarded by a per-design
lock and an optimistic ``expected_revision`` token (stale writers get 409).
Every accepted op is appended to a JSON-lines log and the design snapshot is
rewritten, so a restarted service replays the logs and reproduces both the
design bytes and the live diagnostic set.

Configuration: ``BW_DATA_DIR`` (state directory, default ``./bw_data``) and
``BW_BIND_ADDR`` (``host:port`` for ``python -m blockwire.service``).
"""

from __future__ import annotations

import json
import os
import re
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from . import board as board_mod
from .checkers import ProtocolRegistry, builtin_registry
from .composer import ComposeError, compose_schematic
from .diagnostics import Diagnostic
from .engine import Design
from .library import BlockDefinition, BlockLibrary, DuplicateBlockError, NotFoundError


def _range_json(r) -> list[int] | None:
    return [r.min_mv, r.max_mv] if r else None


def block_summary_json(block: BlockDefinition) -> dict:
    return {
        "id": block.block_id,
        "name": block.display_name,
        "classification": block.classification.value,
        "power_in": _range_json(block.power_in),
        "power_out": _range_json(block.power_out),
        "ports": [
            {
                "id": p.port_id,
                "protocol": p.protocol,
                "alt_name": p.alt_name or None,
                "signals": p.signals,
                "optional": p.optional_flag,
                "i2c_addr": p.addr,
                "spi_role": p.role.value if p.role else None,
                "level": _range_json(p.level),
            }
            for p in block.ports
        ],
        "footprint": {
            "w_mm": block.footprint.width_mm,
            "h_mm": block.footprint.height_mm,
            "pads": [{"net": p.net_id, "x_mm": p.x_mm, "y_mm": p.y_mm} for p in block.footprint.pads],
        },
        "image": block.image_ref,
    }


class DesignSession:
    """A design plus its revision counter and append-only op log."""

    def __init__(self, design: Design, log_path: Path | None, snapshot_path: Path | None):
        self.design = design
        self.revision = 0
        self.log_path = log_path
        self.snapshot_path = snapshot_path
        self.lock = threading.Lock()

    def record(self, op: dict, bump: bool = True) -> None:
        if bump:
            self.revision += 1
        if self.log_path is not None:
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"revision": self.revision, "op": op}, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        if self.snapshot_path is not None:
            self.snapshot_path.write_text(self.design.dumps(), encoding="utf-8")

    def state_json(self) -> dict:
        return {
            "revision": self.revision,
            "design": self.design.to_document(),
            "diagnostics": [d.to_json() for d in self.design.live_diagnostics()],
        }


_DESIGN_ID_RE = re.compile(r"^d(\d+)$")


class ServiceState:
    def __init__(self, data_dir: str | Path, registry: ProtocolRegistry | None = None):
        self.data_dir = Path(data_dir)
        self.registry = registry or builtin_registry()
        self.library = BlockLibrary(self.data_dir / "library", registry=self.registry)
        self.designs_dir = self.data_dir / "designs"
        self.designs_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, DesignSession] = {}
        self.create_lock = threading.Lock()
        for log_path in sorted(self.designs_dir.glob("*.ops.jsonl")):
            design_id = log_path.name.removesuffix(".ops.jsonl")
            self.sessions[design_id] = self._replay(design_id, log_path)

    def _paths(self, design_id: str) -> tuple[Path, Path]:
        return (
            self.designs_dir / f"{design_id}.ops.jsonl",
            self.designs_dir / f"{design_id}.design.json",
        )

    def _replay(self, design_id: str, log_path: Path) -> DesignSession:
        snapshot_path = self._paths(design_id)[1]
        design = Design(self.library, registry=self.registry, design_id=design_id)
        session = DesignSession(design, None, None)
        for line in log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            op = entry["op"]
            if op["kind"] == "create":
                design.name = op.get("name") or "design"
            else:
                design.apply_op(op)
            session.revision = entry["revision"]
        session.log_path = log_path
        session.snapshot_path = snapshot_path
        return session

    def create_design(self, name: str) -> DesignSession:
        with self.create_lock:
            highest = 0
            for existing in self.sessions:
                m = _DESIGN_ID_RE.match(existing)
                if m:
                    highest = max(highest, int(m.group(1)))
            design_id = f"d{highest + 1}"
            log_path, snapshot_path = self._paths(design_id)
            design = Design(self.library, registry=self.registry, design_id=design_id, name=name or "design")
            session = DesignSession(design, log_path, snapshot_path)
            self.sessions[design_id] = session
            session.record({"kind": "create", "name": design.name}, bump=False)
            return session

    def session(self, design_id: str) -> DesignSession:
        try:
            return self.sessions[design_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no design {design_id!r}") from None

    def drop_design(self, design_id: str) -> None:
        session = self.session(design_id)
        with session.lock:
            del self.sessions[design_id]
            for path in self._paths(design_id):
                path.unlink(missing_ok=True)


def _diags_json(diags: list[Diagnostic]) -> list[dict]:
    return [d.to_json() for d in diags]


def create_app(
    data_dir: str | Path | None = None,
    registry: ProtocolRegistry | None = None,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    state = ServiceState(data_dir or os.environ.get("BW_DATA_DIR", "bw_data"), registry)
    app = FastAPI(title="blockwire design service")
    app.state.blockwire = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.post("/library/blocks")
    async def import_bundle(file: UploadFile, overwrite: bool = False):
        raw = await file.read()
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise HTTPException(status_code=400, detail=f"bundle is not UTF-8 JSON: {exc}")
        try:
            definition, report = state.library.import_document(doc, overwrite=overwrite)
        except DuplicateBlockError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return report.to_json()

    @app.get("/library/blocks")
    def list_blocks():
        groups = state.library.list_blocks()
        return {
            "groups": {
                cls.value: [block_summary_json(b) for b in blocks]
                for cls, blocks in groups.items()
            }
        }

    @app.get("/library/blocks/{block_id}")
    def get_block(block_id: str):
        try:
            block = state.library.get_block(block_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        out = block_summary_json(block)
        out["bundle"] = state.library.get_document(block_id)
        return out

    @app.delete("/library/blocks/{block_id}")
    def delete_block(block_id: str):
        try:
            state.library.remove_block(block_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"removed": block_id}

    @app.post("/designs", status_code=201)
    async def create_design(request: Request):
        body = {}
        raw = await request.body()
        if raw:
            try:
                body = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise HTTPException(status_code=400, detail=f"malformed body: {exc}")
        session = state.create_design(str(body.get("name", "")))
        return {"design_id": session.design.design_id, "revision": session.revision}

    @app.get("/designs")
    def list_designs():
        return {
            "designs": [
                {"design_id": s.design.design_id, "name": s.design.name, "revision": s.revision}
                for s in sorted(state.sessions.values(), key=lambda s: s.design.design_id)
            ]
        }

    @app.get("/designs/{design_id}")
    def get_design(design_id: str):
        return state.session(design_id).state_json()

    @app.delete("/designs/{design_id}")
    def delete_design(design_id: str):
        state.drop_design(design_id)
        return {"removed": design_id}

    @app.post("/designs/{design_id}/ops")
    async def apply_op(design_id: str, request: Request):
        session = state.session(design_id)
        try:
            body = json.loads(await request.body())
            op = dict(body["op"])
            expected = int(body["expected_revision"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"malformed op body: {exc!r}")
        with session.lock:
            if expected != session.revision:
                raise HTTPException(
                    status_code=409,
                    detail=f"stale revision {expected}; design is at {session.revision}",
                )
            try:
                outcome = session.design.apply_op(op)
            except NotFoundError as exc:
                raise HTTPException(status_code=404, detail=str(exc))
            if outcome.applied:
                if op["kind"] == "add_instance":
                    op["instance_id"] = outcome.instance_id
                session.record(op)
            return {
                "revision": session.revision,
                "applied": outcome.applied,
                "instance_id": outcome.instance_id,
                "message": outcome.message,
                "new_diagnostics": _diags_json(outcome.new),
                "retracted_diagnostics": _diags_json(outcome.retracted),
            }

    @app.post("/designs/{design_id}/compose")
    def compose(design_id: str):
        session = state.session(design_id)
        with session.lock:
            try:
                netlist = compose_schematic(session.design)
            except ComposeError as exc:
                return Response(
                    content=json.dumps(
                        {"message": str(exc), "diagnostics": _diags_json(exc.diagnostics)}
                    ),
                    status_code=422,
                    media_type="application/json",
                )
            try:
                result = board_mod.compose_board(session.design, netlist)
            except board_mod.UnplacedInstanceError as exc:
                return Response(
                    content=json.dumps({"message": str(exc), "diagnostics": []}),
                    status_code=422,
                    media_type="application/json",
                )
            return {
                "netlist": netlist.to_json(),
                "board": {
                    "tracks": [
                        {"net": t.net_name, "layer": t.layer, "points_mm": t.points_mm(session.design.board.pitch_mm)}
                        for t in result.tracks
                    ],
                    "links": len(result.links),
                    "diagnostics": _diags_json(result.diagnostics),
                },
                "svg": result.svg,
            }

    @app.get("/designs/{design_id}/export")
    def export(design_id: str, format: str = "design"):
        session = state.session(design_id)
        with session.lock:
            if format == "design":
                return Response(content=session.design.dumps(), media_type="application/json")
            if format == "netlist":
                try:
                    netlist = compose_schematic(session.design)
                except ComposeError as exc:
                    raise HTTPException(status_code=422, detail=str(exc))
                return Response(content=netlist.dumps(), media_type="application/json")
            if format == "svg":
                try:
                    netlist = compose_schematic(session.design)
                    result = board_mod.compose_board(session.design, netlist)
                except (ComposeError, board_mod.UnplacedInstanceError) as exc:
                    raise HTTPException(status_code=422, detail=str(exc))
                return Response(content=result.svg, media_type="image/svg+xml")
        raise HTTPException(status_code=400, detail=f"unknown export format {format!r}")

    @app.get("/protocols")
    def protocols():
        return {"protocols": state.registry.names()}

    if frontend_dir is None:
        frontend_dir = os.environ.get("BW_FRONTEND_DIR", "frontend")
    frontend_path = Path(frontend_dir)
    if frontend_path.is_dir():
        app.mount("/ui", StaticFiles(directory=frontend_path, html=True), name="ui")

    return app


def main() -> None:  # pragma: no cover
    import uvicorn

    bind = os.environ.get("BW_BIND_ADDR", "127.0.0.1:8787")
    host, _, port = bind.partition(":")
    uvicorn.run(create_app(), host=host or "127.0.0.1", port=int(port or 8787), log_level="warning")


if __name__ == "__main__":  # pragma: no cover
    main()
