"""HTTP interface for the interactive placement loop."""

from __future__ import annotations

import base64
import io
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel, Field

from ..labels import RELATIONS
from ..relnet.model import RelNetModel
from ..scenes.catalog import SubjectCatalog, Template, TEMPLATES, default_catalog
from ..scenes.oracle import assign_depth_ranks, infer_attachment
from ..scenes.render import render
from ..scenes.types import ObjectSpec, rects_intersect
from ..spatial.heatmaps import heatmap_png_bytes
from ..spatial.model import SpatialModel
from ..spatial.sampling import place, rect_polygon
from .parsing import ParseError, parse_instruction, resolve_reference
from .sessions import Session, SessionStore


class AddObjectBody(BaseModel):
    action: str = Field(pattern="^(add|move|remove)$")
    name: Optional[str] = None
    object_id: Optional[int] = None
    center: Optional[list] = None


class SubjectBody(BaseModel):
    catalog_name: str


class InstructBody(BaseModel):
    text: str


class PlaceBody(BaseModel):
    strategy: str = Field(default="sample", pattern="^(argmax|sample)$")
    seed: Optional[int] = None


class RateBody(BaseModel):
    likert: int = Field(ge=1, le=10)
    success: bool


def _png_b64(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(relnet: Optional[RelNetModel] = None,
               spatial: Optional[SpatialModel] = None,
               catalog: Optional[SubjectCatalog] = None,
               persist_dir=None, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="relplace service")
    catalog = catalog or default_catalog()
    image_size = spatial.config.image_size if spatial else 96
    store = SessionStore(image_size=image_size, persist_dir=persist_dir)
    reference_templates = {t.name: t for t in TEMPLATES}
    app.state.store = store

    def need_session(session_id: str) -> Session:
        session = store.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def scene_payload(session: Session) -> dict:
        return {"scene": session.scene.to_dict(),
                "render_png": _png_b64(render(session.scene).image)}

    @app.exception_handler(ParseError)
    async def parse_error_handler(_, exc: ParseError):
        return JSONResponse(status_code=422, content=exc.payload())

    @app.post("/session", status_code=201)
    def create_session():
        session = store.create()
        return {"session_id": session.id}

    @app.get("/session/{session_id}/scene")
    def get_scene(session_id: str):
        session = need_session(session_id)
        with session.lock:
            return scene_payload(session)

    @app.get("/session/{session_id}/catalog")
    def get_catalog(session_id: str):
        need_session(session_id)
        return {"subjects": [t.name for t in catalog.templates],
                "references": sorted(reference_templates)}

    @app.post("/session/{session_id}/scene/objects")
    def mutate_objects(session_id: str, body: AddObjectBody):
        session = need_session(session_id)
        with session.lock:
            scene = session.scene
            if body.action == "add":
                if not body.name or body.center is None:
                    raise HTTPException(422, "add requires name and center")
                template = reference_templates.get(body.name)
                if template is None:
                    raise HTTPException(422, f"unknown object '{body.name}'; "
                                        f"choose from {sorted(reference_templates)}")
                obj = ObjectSpec(id=scene.next_id(), shape=template.shape,
                                 center=(int(body.center[0]), int(body.center[1])),
                                 size=template.size, color=template.color,
                                 name=template.name)
                _check_on_table(scene, obj)
                _attach(scene, obj)
                scene.objects.append(obj)
            elif body.action == "move":
                obj = _find_object(scene, body.object_id)
                if body.center is None:
                    raise HTTPException(422, "move requires center")
                obj.center = (int(body.center[0]), int(body.center[1]))
                _check_on_table(scene, obj)
                _attach(scene, obj)
            else:
                obj = _find_object(scene, body.object_id)
                dependents = [o for o in scene.objects
                              if o.support_id == obj.id or o.container_id == obj.id]
                for dep in dependents:
                    dep.support_id = None
                    dep.container_id = None
                scene.objects.remove(obj)
            assign_depth_ranks(scene)
            session.last_parsed = None
            session.last_maps = None
            store.persist(session, {"event": "objects", "action": body.action})
            return scene_payload(session)

    @app.post("/session/{session_id}/subject")
    def set_subject(session_id: str, body: SubjectBody):
        session = need_session(session_id)
        try:
            template = catalog.get(body.catalog_name)
        except KeyError:
            raise HTTPException(422, f"unknown catalog entry '{body.catalog_name}'; "
                                f"choose from {catalog.names()}")
        with session.lock:
            session.pending_subject = template
            store.persist(session, {"event": "subject", "name": template.name})
            return {"pending_subject": template.name}

    @app.post("/session/{session_id}/instruct")
    def instruct(session_id: str, body: InstructBody):
        session = need_session(session_id)
        if spatial is None:
            raise HTTPException(503, "no placement model loaded")
        with session.lock:
            pending = session.pending_subject.name if session.pending_subject else None
            parsed = parse_instruction(body.text, session.scene, catalog,
                                       pending_subject_name=pending)
            reference = resolve_reference(session.scene, parsed.reference_name)
            if session.pending_subject is None and parsed.subject_name in catalog.names():
                session.pending_subject = catalog.get(parsed.subject_name)
            image = render(session.scene).image
            a_o = spatial.make_mask(reference.bbox, session.scene.width,
                                    session.scene.height)
            maps = spatial.predict(image, a_o)
            session.last_parsed = parsed
            session.last_maps = maps
            session.history.append(_new_history(body.text, parsed))
            channels = {}
            for i, rel in enumerate(RELATIONS):
                png, norm = heatmap_png_bytes(maps.gamma[i])
                channels[rel] = {"png_b64": base64.b64encode(png).decode("ascii"),
                                 "normalization": norm}
            store.persist(session, {"event": "instruct", "parsed": parsed.to_dict()})
            return {"parsed": parsed.to_dict(),
                    "subject_mismatch": bool(pending and parsed.subject_name != pending),
                    "reference_id": reference.id,
                    "width": session.scene.width, "height": session.scene.height,
                    "channels": channels}

    @app.post("/session/{session_id}/place")
    def place_subject(session_id: str, body: PlaceBody):
        session = need_session(session_id)
        with session.lock:
            if session.pending_subject is None:
                raise HTTPException(409, "no pending subject; POST /subject first")
            if session.last_parsed is None or session.last_maps is None:
                raise HTTPException(409, "no prior instruction; POST /instruct first")
            rng = np.random.default_rng(body.seed)
            point = place(session.last_maps, session.last_parsed.relation,
                          strategy=body.strategy,
                          valid_region=rect_polygon(session.scene.table_region),
                          rng=rng)
            if point is None:
                raise HTTPException(409, "no feasible placement inside the table region")
            template = session.pending_subject
            obj = ObjectSpec(id=session.scene.next_id(), shape=template.shape,
                             center=(int(point[0]), int(point[1])), size=template.size,
                             color=template.color, name=template.name)
            _attach(session.scene, obj)
            session.scene.objects.append(obj)
            assign_depth_ranks(session.scene)
            session.history[-1].placement = [int(point[0]), int(point[1])]
            session.pending_subject = None
            session.last_maps = None
            store.persist(session, {"event": "place", "point": list(point)})
            return {"placement": [int(point[0]), int(point[1])],
                    "object_id": obj.id, **scene_payload(session)}

    @app.post("/session/{session_id}/rate")
    def rate(session_id: str, body: RateBody):
        session = need_session(session_id)
        with session.lock:
            entry = _last_unrated(session)
            if entry is None:
                raise HTTPException(409, "nothing to rate; place an object first")
            entry.rating = {"likert": body.likert, "success": body.success}
            store.persist(session, {"event": "rate", **entry.rating})
            return {"history_length": len(session.history)}

    @app.get("/session/{session_id}/report")
    def report(session_id: str):
        session = need_session(session_id)
        with session.lock:
            rows = {}
            for rel in RELATIONS:
                rated = [e for e in session.history
                         if e.rating and e.parsed.get("relation") == rel]
                if not rated:
                    continue
                rows[rel] = {
                    "count": len(rated),
                    "mean_likert": float(np.mean([e.rating["likert"] for e in rated])),
                    "success_rate": float(np.mean([e.rating["success"] for e in rated])),
                }
            return {"per_relation": rows,
                    "history": [e.to_dict() for e in session.history]}

    @app.get("/session/{session_id}/calibration")
    def calibration(session_id: str):
        session = need_session(session_id)
        with session.lock:
            h, w = session.scene.height, session.scene.width
            tx, ty, tw, th = session.scene.table_region
            marker = (tx + tw // 2, ty + th // 2)
            peak_map = np.zeros((h, w), dtype=np.float32)
            peak_map[marker[1], marker[0]] = 1.0
            png, norm = heatmap_png_bytes(peak_map)
            return {"marker": [marker[0], marker[1]],
                    "png_b64": base64.b64encode(png).decode("ascii"),
                    "normalization": norm, "width": w, "height": h}

    if frontend_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="frontend")
    return app


def _new_history(text: str, parsed):
    from .sessions import HistoryEntry

    return HistoryEntry(instruction=text, parsed=parsed.to_dict())


def _last_unrated(session: Session):
    for entry in reversed(session.history):
        if entry.placement is not None and entry.rating is None:
            return entry
        if entry.rating is not None:
            return None
    return None


def _find_object(scene, object_id):
    if object_id is None:
        raise HTTPException(422, "object_id required")
    for obj in scene.objects:
        if obj.id == object_id:
            return obj
    raise HTTPException(422, f"no object with id {object_id}")


def _check_on_table(scene, obj: ObjectSpec) -> None:
    if not rects_intersect(obj.bbox, scene.table_region):
        raise HTTPException(422, "object footprint misses the table region")


def _attach(scene, obj: ObjectSpec) -> None:
    obj.support_id = None
    obj.container_id = None
    attachment = infer_attachment(scene, obj.center, obj.size, exclude_id=obj.id)
    if attachment:
        kind, host = attachment
        if kind == "container":
            obj.container_id = host
        else:
            obj.support_id = host


def create_app_from_paths(relnet_path=None, spatial_path=None, catalog_path=None,
                          frontend_dir=None, persist_dir=None) -> FastAPI:
    relnet = None
    spatial = None
    if relnet_path:
        from ..relnet import load_checkpoint as load_relnet

        relnet = load_relnet(relnet_path)
    if spatial_path:
        from ..spatial import load_checkpoint as load_spatial

        spatial = load_spatial(spatial_path)
    catalog = None
    if catalog_path:
        cp = Path(catalog_path)
        catalog = SubjectCatalog.load(cp / "catalog.json" if cp.is_dir() else cp)
    return create_app(relnet=relnet, spatial=spatial, catalog=catalog,
                      persist_dir=persist_dir, frontend_dir=frontend_dir)
