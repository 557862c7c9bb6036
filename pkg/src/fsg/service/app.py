"""FastAPI application wrapping the toolkit.

All compute lives behind these endpoints; the CLI is a thin client.  Errors
surface as JSON bodies carrying a stable ``error_class`` (validation,
convergence, protocol, io, internal) that clients map to exit codes.
"""

from __future__ import annotations

import base64

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, appearance, curation, metrics, poisson
from ..appearance import SourceView
from ..core import PlanePoint
from ..errors import ToolkitError, ValidationError
from ..generators import make_generator
from ..metrics import SwapEval
from ..pipeline import SwapConfig, SwapSession, TargetFrame
from ..masks import OcclusionSpec
from . import schemas

_STATUS_BY_CLASS = {
    "validation": 400,
    "io": 404,
    "convergence": 409,
    "protocol": 502,
    "internal": 500,
}


def create_app() -> FastAPI:
    app = FastAPI(title="fsg", version=__version__)

    @app.exception_handler(ToolkitError)
    async def toolkit_error_handler(_: Request, exc: ToolkitError):
        body = schemas.ErrorBody(error_class=exc.error_class, message=str(exc))
        return JSONResponse(
            status_code=_STATUS_BY_CLASS.get(exc.error_class, 500),
            content=body.model_dump(),
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/v1/blend", response_model=schemas.BlendResponse)
    def blend(req: schemas.BlendRequest):
        problem = poisson.BlendProblem(
            target=req.target.to_image(),
            source=req.source.to_image(),
            mask=req.mask.to_binary(),
        )
        image, report = poisson.blend(
            problem, tol=req.tol, max_iter=req.max_iter, method=req.method
        )
        return schemas.BlendResponse(
            image=schemas.ImagePayload.from_image(image),
            report=schemas.SolverReportPayload(**report.__dict__),
        )

    @app.post("/v1/maps/build", response_model=schemas.BuildMapResponse)
    def build_map(req: schemas.BuildMapRequest):
        views = list(req.views)
        if req.flip_fill:
            yaws = [v.yaw for v in views]
            pos = all(y >= -1e-9 for y in yaws) and any(y > 1e-9 for y in yaws)
            neg = all(y <= 1e-9 for y in yaws) and any(y < -1e-9 for y in yaws)
            if pos or neg:
                views += [
                    schemas.ViewGeometry(
                        id=f"{v.id}~flip",
                        yaw=-v.yaw,
                        pitch=v.pitch,
                        roll=-v.roll,
                        blur=v.blur,
                    )
                    for v in views
                    if abs(v.yaw) > 1e-9
                ]
        entries = [(PlanePoint(v.yaw, v.pitch), v.roll, v.blur) for v in views]
        retained = appearance.prune_views(
            entries, radius=req.prune_radius, blur_threshold=req.blur_threshold
        )
        kept = [views[i] for i in retained]
        amap = appearance.build_map(
            [
                appearance.ViewRecord(
                    PlanePoint(v.yaw, v.pitch), v.id, v.id.endswith("~flip")
                )
                for v in kept
            ],
            bound=req.bound,
        )
        return schemas.BuildMapResponse(
            map=appearance.map_to_json(amap),
            fsam_b64=base64.b64encode(appearance.map_to_bytes(amap)).decode("ascii"),
            retained_ids=[v.id for v in kept],
        )

    @app.post("/v1/maps/query", response_model=schemas.QueryResponse)
    def query_map(req: schemas.QueryRequest):
        if req.map_fsam_b64 is not None:
            amap = appearance.map_from_bytes(base64.b64decode(req.map_fsam_b64))
        elif req.map is not None:
            amap = appearance.map_from_json(req.map)
        else:
            raise ValidationError("query needs either a map document or FSAM bytes")
        vq = appearance.query(amap, req.pose.to_pose())
        return schemas.QueryResponse(
            triangle=list(vq.triangle),
            weights=list(vq.weights),
            raw_weights=list(vq.raw_weights),
            views=vq.view_weights(amap),
        )

    @app.post("/v1/swap", response_model=schemas.SwapResponse)
    def swap(req: schemas.SwapRequest):
        config = _config_from_payload(req.config)
        sources = [_source_from_payload(p) for p in req.sources]
        if not req.targets:
            raise ValidationError("swap request carries no target frames")
        handles = _make_handles(req.config.generators, config.timeout)
        try:
            session = SwapSession(sources, config, handles)
            frames, reports = [], []
            for t in req.targets:
                result = session.swap_frame(
                    TargetFrame(
                        image=t.image.to_image(),
                        landmarks=t.landmarks.to_landmarks(),
                        pose=t.pose.to_pose(),
                    )
                )
                frames.append(schemas.ImagePayload.from_image(result.image))
                reports.append(
                    schemas.SolverReportPayload(**result.report.__dict__)
                    if result.report
                    else None
                )
            return schemas.SwapResponse(frames=frames, reports=reports)
        finally:
            for h in handles.values():
                h.close()

    @app.post("/v1/curate", response_model=schemas.CurateResponse)
    def curate(req: schemas.CurateRequest):
        records = [
            curation.FrameRecord(
                frame_id=f.id,
                point=PlanePoint(f.yaw, f.pitch),
                roll=f.roll,
                blur=f.blur,
                coverage=f.coverage,
                landmarks=f.landmarks.to_landmarks() if f.landmarks else None,
            )
            for f in req.frames
        ]
        kept = curation.prune_frames(
            records,
            coverage_min=req.coverage_min,
            prune_radius=req.prune_radius,
            blur_threshold=req.blur_threshold,
        )
        kept = curation.select_max_variance(kept, cap=req.cap)
        return schemas.CurateResponse(retained_ids=[f.frame_id for f in kept])

    @app.post("/v1/eval", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest):
        grouped = {}
        for video in req.videos:
            evals = []
            for f in video.frames:
                evals.append(
                    SwapEval(
                        ssim=metrics.ssim(f.result.to_image(), f.reference.to_image()),
                        euler_err=metrics.pose_error(
                            f.result_pose.to_pose(), f.target_pose.to_pose()
                        ),
                        landmark_err=metrics.landmark_error(
                            f.result_landmarks.to_landmarks(),
                            f.target_landmarks.to_landmarks(),
                        ),
                        verification=f.verification,
                    )
                )
            grouped[video.video_id] = evals
        stats = metrics.aggregate(grouped)
        table = metrics.format_table(stats)
        columns = [m for m in metrics.METRIC_COLUMNS if m in table]
        csv = ",".join(columns) + "\n" + ",".join(table[c] for c in columns) + "\n"
        return schemas.EvalResponse(stats=stats, table=table, csv=csv)

    @app.post("/v1/densify", response_model=schemas.DensifyResponse)
    def densify(req: schemas.DensifyRequest):
        config = _config_from_payload(req.config)
        sources = [_source_from_payload(p) for p in req.sources]
        if not req.poses:
            raise ValidationError("densify request carries no poses")
        with_landmarks = [v for v in sources if v.landmarks is not None]
        if not with_landmarks:
            raise ValidationError("densify needs at least one view with landmarks")
        handles = _make_handles(req.config.generators, config.timeout)
        try:
            session = SwapSession(sources, config, handles)
            out = []
            for i, pose_payload in enumerate(req.poses):
                pose = pose_payload.to_pose()
                nearest = metrics.nearest_pose_index(
                    pose, [v.pose for v in with_landmarks]
                )
                landmarks = with_landmarks[nearest].landmarks
                interp = appearance.interpolate_views(
                    session.map,
                    pose,
                    landmarks,
                    session.images,
                    handles["r"],
                    config.sigma,
                )
                out.append(
                    schemas.SourceViewPayload(
                        id=f"gen{i}@{pose.yaw:g},{pose.pitch:g}",
                        image=schemas.ImagePayload.from_image(interp.image),
                        pose=schemas.PosePayload(
                            yaw=pose.yaw, pitch=pose.pitch, roll=pose.roll
                        ),
                        landmarks=schemas.LandmarksPayload.from_landmarks(landmarks),
                    )
                )
            return schemas.DensifyResponse(views=out)
        finally:
            for h in handles.values():
                h.close()

    return app


def _config_from_payload(p: schemas.SwapConfigPayload) -> SwapConfig:
    occlusion = None
    if p.occlusion is not None:
        occlusion = OcclusionSpec(
            count=tuple(p.occlusion.count),
            semi_axis=tuple(p.occlusion.semi_axis),
            aspect=tuple(p.occlusion.aspect),
            seed=p.occlusion.seed,
        )
    return SwapConfig(
        step_budget=p.step_budget,
        prune_radius=p.prune_radius,
        blur_threshold=p.blur_threshold,
        occlusion=occlusion,
        tol=p.tol,
        max_iter=p.max_iter,
        hair_as_free=p.hair_as_free,
        sigma=p.sigma,
        bound=p.bound,
        flip_fill=p.flip_fill,
        flip_symmetry=tuple(p.flip_symmetry) if p.flip_symmetry else None,
        timeout=p.timeout,
    )


def _source_from_payload(p: schemas.SourceViewPayload) -> SourceView:
    return SourceView(
        view_id=p.id,
        image=p.image.to_image(),
        pose=p.pose.to_pose(),
        landmarks=p.landmarks.to_landmarks() if p.landmarks else None,
        blur=p.blur,
    )


def _make_handles(endpoints: schemas.GeneratorEndpoints, timeout: float):
    handles = {
        "r": make_generator(endpoints.r, "r", timeout),
        "s": make_generator(endpoints.s, "s", timeout),
        "c": make_generator(endpoints.c, "c", timeout),
    }
    if endpoints.b:
        handles["b"] = make_generator(endpoints.b, "b", timeout)
    return handles


app = create_app()
