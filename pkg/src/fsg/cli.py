"""Command-line client.

Every command translates local files into service requests and writes the
responses back to disk; all pipeline compute runs behind the HTTP API.  With
``--server URL`` the requests go to a running ``fsg serve`` instance,
otherwise an in-process service handles them.

Exit codes: 0 success, 2 I/O failure, 3 validation failure, 4 solver
non-convergence, 5 wire-protocol failure.  ``FSG_LOG`` (debug/info/warning/
error) controls verbosity on stderr.
"""

from __future__ import annotations

import asyncio
import base64
import json
import logging
import os
import sys
from pathlib import Path

import click
import httpx
import numpy as np

from . import __version__, config as configmod, io as iomod
from .errors import (
    EXIT_IO,
    EXIT_VALIDATION,
    ToolkitError,
    ValidationError,
)
from .service.schemas import (
    BlendRequest,
    BuildMapRequest,
    CurateRequest,
    DensifyRequest,
    EvalFramePayload,
    EvalRequest,
    EvalVideoPayload,
    FrameRecordPayload,
    GeneratorEndpoints,
    ImagePayload,
    LandmarksPayload,
    MaskPayload,
    OcclusionPayload,
    PosePayload,
    QueryRequest,
    SourceViewPayload,
    SwapConfigPayload,
    SwapRequest,
    TargetFramePayload,
    ViewGeometry,
)

log = logging.getLogger("fsg")

_CLASS_EXIT = {"io": 2, "validation": 3, "convergence": 4, "protocol": 5}


class ServiceClient:
    """Minimal JSON-over-HTTP client; in-process ASGI when no server given."""

    def __init__(self, server: str | None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        if self.server:
            try:
                with httpx.Client(base_url=self.server, timeout=600.0) as client:
                    resp = client.post(path, json=payload)
            except httpx.HTTPError as exc:
                _fail(EXIT_IO, f"cannot reach service at {self.server}: {exc}")
        else:
            resp = asyncio.run(self._post_inprocess(path, payload))
        if resp.status_code >= 400:
            _fail_from_response(resp)
        return resp.json()

    async def _post_inprocess(self, path: str, payload: dict):
        from .service import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://fsg.internal", timeout=600.0
        ) as client:
            return await client.post(path, json=payload)


def _fail(code: int, message: str):
    log.error(message)
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _fail_from_response(resp):
    try:
        body = resp.json()
        error_class = body.get("error_class", "internal")
        message = body.get("message", resp.text)
    except (ValueError, AttributeError):
        error_class, message = "internal", resp.text
    _fail(_CLASS_EXIT.get(error_class, 1), f"[{error_class}] {message}")


def _guard_io(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except FileNotFoundError as exc:
        _fail(EXIT_IO, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    except ValidationError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except ToolkitError as exc:
        _fail(exc.exit_code, str(exc))


def _parse_pose(text: str) -> PosePayload:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) not in (2, 3):
        raise ValidationError(f"pose must be 'yaw,pitch[,roll]', got {text!r}")
    vals = [float(p) for p in parts] + [0.0] * (3 - len(parts))
    return PosePayload(yaw=vals[0], pitch=vals[1], roll=vals[2])


def _config_payload(config_path, steps, prune_radius, tol, seed, gens) -> SwapConfigPayload:
    cfg = (
        _guard_io(configmod.parse_config, config_path)
        if config_path
        else configmod.config_from_mapping({})
    )
    endpoints = GeneratorEndpoints()
    for role in "rscb":
        endpoint = gens.get(role) or cfg.generators.get(role)
        if endpoint:
            setattr(endpoints, role, endpoint)
    occlusion = None
    if cfg.occlusion is not None:
        occlusion = OcclusionPayload(
            count=cfg.occlusion.count,
            semi_axis=cfg.occlusion.semi_axis,
            aspect=cfg.occlusion.aspect,
            seed=seed if seed is not None else cfg.occlusion.seed,
        )
    return SwapConfigPayload(
        step_budget=steps if steps is not None else cfg.step_budget,
        prune_radius=prune_radius if prune_radius is not None else cfg.prune_radius,
        blur_threshold=cfg.blur_threshold,
        occlusion=occlusion,
        tol=tol if tol is not None else cfg.tol,
        max_iter=cfg.max_iter,
        hair_as_free=cfg.hair_as_free,
        sigma=cfg.sigma,
        bound=cfg.bound,
        flip_fill=cfg.flip_fill,
        flip_symmetry=list(cfg.flip_symmetry) if cfg.flip_symmetry else None,
        timeout=cfg.timeout,
        generators=endpoints,
    )


def _source_payloads(manifest) -> list[SourceViewPayload]:
    rows = _guard_io(configmod.read_views_manifest, manifest)
    views = _guard_io(configmod.load_source_views, rows)
    return [
        SourceViewPayload(
            id=v.view_id,
            image=ImagePayload.from_image(v.image),
            pose=PosePayload(yaw=v.pose.yaw, pitch=v.pose.pitch, roll=v.pose.roll),
            landmarks=LandmarksPayload.from_landmarks(v.landmarks)
            if v.landmarks
            else None,
            blur=v.blur,
        )
        for v in views
    ]


@click.group()
@click.option("--server", default=None, help="Base URL of a running fsg service.")
@click.version_option(__version__)
@click.pass_context
def main(ctx, server):
    """Face swapping / reenactment pipeline toolkit."""
    level = os.environ.get("FSG_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    ctx.obj = ServiceClient(server)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8700, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option("--target", "target_path", required=True, type=click.Path())
@click.option("--source", "source_path", required=True, type=click.Path())
@click.option("--mask", "mask_path", required=True, type=click.Path(),
              help="8-bit raster; nonzero marks free pixels.")
@click.option("--out", required=True, type=click.Path())
@click.option("--tol", default=None, type=float)
@click.option("--max-iter", default=None, type=int)
@click.option("--method", default="auto", type=click.Choice(["auto", "direct", "conjugate-gradient"]))
@click.pass_obj
def blend(client, target_path, source_path, mask_path, out, tol, max_iter, method):
    """Gradient-domain blend of a source face onto a target frame."""
    target = _guard_io(iomod.read_image, target_path)
    source = _guard_io(iomod.read_image, source_path)
    free = _guard_io(iomod.read_binary_mask, mask_path)
    labels = np.where(free, np.uint8(1), np.uint8(0))
    req = BlendRequest(
        target=ImagePayload.from_image(target),
        source=ImagePayload.from_image(source),
        mask=MaskPayload(
            height=labels.shape[0],
            width=labels.shape[1],
            labels_b64=base64.b64encode(labels.tobytes()).decode("ascii"),
        ),
        tol=tol if tol is not None else 1e-6,
        max_iter=max_iter,
        method=method,
    )
    body = client.post("/v1/blend", req.model_dump())
    _guard_io(iomod.write_image, out, ImagePayload(**body["image"]).to_image())
    report_path = Path(out).with_suffix(Path(out).suffix + ".report.json")
    _guard_io(report_path.write_text, json.dumps(body["report"], indent=2) + "\n")
    click.echo(json.dumps(body["report"]))


@main.command("build-map")
@click.option("--manifest", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Output .fsam path.")
@click.option("--prune-radius", default=None, type=float)
@click.option("--no-flip-fill", is_flag=True, default=False)
@click.pass_obj
def build_map(client, manifest, out, prune_radius, no_flip_fill):
    """Build a subject's appearance map from a views manifest."""
    rows = _guard_io(configmod.read_views_manifest, manifest)
    req = BuildMapRequest(
        views=[
            ViewGeometry(
                id=r.view_id,
                yaw=r.pose.yaw,
                pitch=r.pose.pitch,
                roll=r.pose.roll,
                blur=r.blur,
            )
            for r in rows
        ],
        prune_radius=prune_radius if prune_radius is not None else 5.0,
        flip_fill=not no_flip_fill,
    )
    body = client.post("/v1/maps/build", req.model_dump())
    _guard_io(Path(out).write_bytes, base64.b64decode(body["fsam_b64"]))
    json_path = Path(out).with_suffix(".json")
    _guard_io(json_path.write_text, json.dumps(body["map"], indent=2) + "\n")
    click.echo(json.dumps({"retained": body["retained_ids"], "out": str(out)}))


@main.command()
@click.option("--map", "map_path", required=True, type=click.Path())
@click.option("--pose", required=True, help="'yaw,pitch[,roll]' in degrees.")
@click.pass_obj
def query(client, map_path, pose):
    """Barycentric view weights for a pose against a stored map."""
    raw = _guard_io(Path(map_path).read_bytes)
    req = QueryRequest(
        map_fsam_b64=base64.b64encode(raw).decode("ascii"),
        pose=_parse_pose(pose),
    )
    body = client.post("/v1/maps/query", req.model_dump())
    click.echo(json.dumps(body))


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--manifest", required=True, type=click.Path(),
              help="Source views manifest.")
@click.option("--targets", "targets_path", required=True, type=click.Path(),
              help="Target frames manifest.")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--seed", default=None, type=int)
@click.option("--gen-r", default=None)
@click.option("--gen-s", default=None)
@click.option("--gen-c", default=None)
@click.option("--gen-b", default=None)
@click.option("--steps", default=None, type=float,
              help="Reenactment step budget, degrees per step.")
@click.option("--prune-radius", default=None, type=float)
@click.option("--tol", default=None, type=float)
@click.option("--format", "fmt", default="fsim", type=click.Choice(["fsim", "png"]))
@click.pass_obj
def swap(client, config_path, manifest, targets_path, out, seed, gen_r, gen_s,
         gen_c, gen_b, steps, prune_radius, tol, fmt):
    """Swap the source subject onto every target frame."""
    cfg = _config_payload(
        config_path, steps, prune_radius, tol, seed,
        {"r": gen_r, "s": gen_s, "c": gen_c, "b": gen_b},
    )
    sources = _source_payloads(manifest)
    targets = _guard_io(configmod.read_targets_manifest, targets_path)
    req = SwapRequest(
        sources=sources,
        targets=[
            TargetFramePayload(
                image=ImagePayload.from_image(t.image),
                landmarks=LandmarksPayload.from_landmarks(t.landmarks),
                pose=PosePayload(yaw=t.pose.yaw, pitch=t.pose.pitch, roll=t.pose.roll),
            )
            for t in targets
        ],
        config=cfg,
    )
    body = client.post("/v1/swap", req.model_dump())
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, frame in enumerate(body["frames"]):
        path = out_dir / f"frame_{i:04d}.{fmt}"
        _guard_io(iomod.write_image, path, ImagePayload(**frame).to_image())
        written.append(str(path))
    reports_path = out_dir / "reports.json"
    _guard_io(
        reports_path.write_text, json.dumps(body["reports"], indent=2) + "\n"
    )
    click.echo(json.dumps({"frames": written, "reports": str(reports_path)}))


@main.command("eval")
@click.option("--manifest", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Output CSV path.")
@click.pass_obj
def eval_cmd(client, manifest, out):
    """Aggregate swap metrics into a mean ± std table."""
    rows = _guard_io(configmod.read_eval_manifest, manifest)
    videos: dict[str, list[EvalFramePayload]] = {}
    for row in rows:
        videos.setdefault(row.video_id, []).append(
            EvalFramePayload(
                result=ImagePayload.from_image(_guard_io(iomod.read_image, row.result_path)),
                reference=ImagePayload.from_image(
                    _guard_io(iomod.read_image, row.reference_path)
                ),
                result_pose=_pose_payload_from_file(row.result_pose_path),
                target_pose=_pose_payload_from_file(row.target_pose_path),
                result_landmarks=LandmarksPayload.from_landmarks(
                    _guard_io(iomod.read_landmark_file, row.result_landmarks_path)[0]
                ),
                target_landmarks=LandmarksPayload.from_landmarks(
                    _guard_io(iomod.read_landmark_file, row.target_landmarks_path)[0]
                ),
                verification=row.verification,
            )
        )
    req = EvalRequest(
        videos=[EvalVideoPayload(video_id=vid, frames=frames) for vid, frames in videos.items()]
    )
    body = client.post("/v1/eval", req.model_dump())
    _guard_io(Path(out).write_text, body["csv"])
    stats_path = Path(out).with_suffix(".json")
    _guard_io(stats_path.write_text, json.dumps(body["stats"], indent=2) + "\n")
    click.echo(body["csv"], nl=False)


def _pose_payload_from_file(path) -> PosePayload:
    pose = _guard_io(iomod.read_pose_file, path)[0]
    return PosePayload(yaw=pose.yaw, pitch=pose.pitch, roll=pose.roll)


@main.command()
@click.option("--manifest", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Retained frame ids, one per line.")
@click.option("--coverage-min", default=0.15, type=float)
@click.option("--prune-radius", default=None, type=float)
@click.option("--blur-threshold", default=None, type=float)
@click.option("--cap", default=100, type=int)
@click.pass_obj
def curate(client, manifest, out, coverage_min, prune_radius, blur_threshold, cap):
    """Prune and cap a subject's frame set."""
    records = _guard_io(configmod.read_frames_manifest, manifest)
    req = CurateRequest(
        frames=[
            FrameRecordPayload(
                id=r.frame_id,
                yaw=r.point.yaw,
                pitch=r.point.pitch,
                roll=r.roll,
                blur=r.blur,
                coverage=r.coverage,
                landmarks=LandmarksPayload.from_landmarks(r.landmarks)
                if r.landmarks
                else None,
            )
            for r in records
        ],
        coverage_min=coverage_min,
        prune_radius=prune_radius if prune_radius is not None else 5.0,
        blur_threshold=blur_threshold,
        cap=cap,
    )
    body = client.post("/v1/curate", req.model_dump())
    _guard_io(Path(out).write_text, "\n".join(body["retained_ids"]) + "\n")
    click.echo(json.dumps(body))


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--manifest", required=True, type=click.Path())
@click.option("--at", "poses", multiple=True, required=True,
              help="'yaw,pitch' to synthesize; repeatable.")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--gen-r", default=None)
@click.option("--gen-s", default=None)
@click.option("--gen-c", default=None)
@click.option("--prune-radius", default=None, type=float)
@click.pass_obj
def densify(client, config_path, manifest, poses, out, gen_r, gen_s, gen_c, prune_radius):
    """Synthesize artificial views to fill a sparse appearance map."""
    cfg = _config_payload(
        config_path, None, prune_radius, None, None,
        {"r": gen_r, "s": gen_s, "c": gen_c, "b": None},
    )
    req = DensifyRequest(
        sources=_source_payloads(manifest),
        poses=[_parse_pose(p) for p in poses],
        config=cfg,
    )
    body = client.post("/v1/densify", req.model_dump())
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_lines = ["# fsg views v1"]
    for view in body["views"]:
        payload = SourceViewPayload(**view)
        img_path = out_dir / f"{payload.id.replace('/', '_')}.fsim"
        _guard_io(iomod.write_image, img_path, payload.image.to_image())
        lm_path = img_path.with_suffix(".landmarks.txt")
        _guard_io(
            iomod.write_landmark_file, lm_path, payload.landmarks.to_landmarks()
        )
        manifest_lines.append(
            f"{payload.id} {img_path.name} {lm_path.name} "
            f"{payload.pose.yaw!r} {payload.pose.pitch!r} {payload.pose.roll!r}"
        )
    _guard_io(
        (out_dir / "views.txt").write_text, "\n".join(manifest_lines) + "\n"
    )
    click.echo(json.dumps({"views": [v["id"] for v in body["views"]], "out": str(out_dir)}))


if __name__ == "__main__":
    main()
