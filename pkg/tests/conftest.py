import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fsg.appearance import SourceView
from fsg.core import EulerPose, Image
from fsg.pipeline import TargetFrame
from fsg import synthetic

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_source_view(view_id, yaw, pitch, roll=0.0, size=72, scale=40.0):
    pose = EulerPose(yaw, pitch, roll)
    _, lm = synthetic.pose_landmarks(pose, center=(size / 2, size / 2, 0.0), scale=scale)
    return SourceView(
        view_id=view_id,
        image=synthetic.render_face(lm, size, size),
        pose=pose,
        landmarks=lm,
    )


def make_target_frame(yaw, pitch, roll=0.0, size=72, scale=40.0, shift=(0.0, 0.0)):
    pose = EulerPose(yaw, pitch, roll)
    _, lm = synthetic.pose_landmarks(
        pose, center=(size / 2 + shift[0], size / 2 + shift[1], 0.0), scale=scale
    )
    return TargetFrame(
        image=synthetic.render_face(lm, size, size),
        landmarks=lm,
        pose=pose,
    )


@pytest.fixture
def synthetic_scene():
    """Four source views plus one target frame of the parametric face."""
    views = [
        make_source_view("v0", -20.0, -5.0),
        make_source_view("v1", -8.0, 6.0),
        make_source_view("v2", 10.0, -4.0),
        make_source_view("v3", 22.0, 8.0),
    ]
    target = make_target_frame(5.0, 2.0, shift=(3.0, -2.0))
    return views, target


def random_image(rng, height, width, channels=3) -> Image:
    return Image(rng.random((height, width, channels), dtype=np.float32))


def write_scene(root: Path, n_targets: int = 3, size: int = 64, scale: float = 34.0):
    """Materialize a synthetic swap scene on disk: source views manifest,
    target frames manifest, and a mock-generator config.  Returns the three
    paths."""
    from fsg import io as iomod

    root.mkdir(parents=True, exist_ok=True)
    view_specs = [(-20.0, -5.0), (-8.0, 6.0), (10.0, -4.0), (22.0, 8.0)]
    view_lines = ["# fsg views v1"]
    for i, (yaw, pitch) in enumerate(view_specs):
        view = make_source_view(f"v{i}", yaw, pitch, size=size, scale=scale)
        iomod.write_image(root / f"view_{i}.fsim", view.image)
        iomod.write_landmark_file(root / f"view_{i}.lm.txt", view.landmarks)
        view_lines.append(
            f"v{i} view_{i}.fsim view_{i}.lm.txt {yaw!r} {pitch!r} 0.0"
        )
    views_manifest = root / "views.txt"
    views_manifest.write_text("\n".join(view_lines) + "\n")

    target_lines = ["# fsg targets v1"]
    for j in range(n_targets):
        yaw = -18.0 + 36.0 * (j / max(1, n_targets - 1))
        pitch = 4.0 * np.sin(j)
        tf = make_target_frame(
            yaw, pitch, size=size, scale=scale, shift=(2.0 * np.cos(j), -1.5)
        )
        iomod.write_image(root / f"target_{j}.fsim", tf.image)
        iomod.write_landmark_file(root / f"target_{j}.lm.txt", tf.landmarks)
        target_lines.append(
            f"target_{j}.fsim target_{j}.lm.txt {tf.pose.yaw!r} {tf.pose.pitch!r} 0.0"
        )
    targets_manifest = root / "targets.txt"
    targets_manifest.write_text("\n".join(target_lines) + "\n")

    config = root / "config.txt"
    config.write_text(
        "gen_r = mock:face\n"
        "gen_s = mock:segment-bg\n"
        "gen_c = mock:identity\n"
        "prune_radius = 5\n"
        "tol = 1e-6\n"
    )
    return views_manifest, targets_manifest, config
