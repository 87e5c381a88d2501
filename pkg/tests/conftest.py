from __future__ import annotations

import numpy as np
import pytest

from spatialqa.fixtures import (
    DynamicFixtureSpec,
    StaticFixtureSpec,
    make_dynamic_fixture,
    make_static_fixture,
)
from spatialqa.scene import CameraFrame


def simple_frame(
    extrinsic=None,
    fx=500.0,
    fy=500.0,
    cx=320.0,
    cy=240.0,
    width=640,
    height=480,
    depth_value=2.0,
    frame_id="f0",
) -> CameraFrame:
    """Minimal frame with a constant depth map; handy for hand-computed cases."""
    if extrinsic is None:
        extrinsic = np.eye(4)
    intr = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
    return CameraFrame(
        frame_id=frame_id,
        width=width,
        height=height,
        intrinsics=intr,
        extrinsic_c2w=np.asarray(extrinsic, dtype=np.float64),
        depth=np.full((height, width), depth_value, dtype=np.float64),
    )


@pytest.fixture(scope="session")
def static_fixture(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundles") / "cuberoom"
    bundle, truth = make_static_fixture(StaticFixtureSpec(), out_root=root)
    return bundle, truth, root


@pytest.fixture(scope="session")
def dynamic_fixture(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundles") / "rigidlab"
    bundle, truth = make_dynamic_fixture(DynamicFixtureSpec(), out_root=root)
    return bundle, truth, root


@pytest.fixture(scope="session")
def bundle_farm(tmp_path_factory):
    """Two static rooms plus four dynamic scenes, written as bundles."""
    base = tmp_path_factory.mktemp("farm")
    roots = []
    for sid, seed in (("rooma", 3), ("roomb", 4)):
        root = base / sid
        make_static_fixture(
            StaticFixtureSpec(scene_id=sid, num_frames=28, lattice_spacing=0.25, seed=seed),
            out_root=root,
        )
        roots.append(root)
    for sid, source, seed in (
        ("dyna", "ego", 21), ("dynb", "studio", 22),
        ("dync", "ego", 23), ("dynd", "studio", 24),
    ):
        root = base / sid
        make_dynamic_fixture(
            DynamicFixtureSpec(scene_id=sid, source=source, seed=seed), out_root=root
        )
        roots.append(root)
    return base, roots


@pytest.fixture(scope="session")
def small_corpus(bundle_farm, tmp_path_factory):
    """A fully emitted corpus over the bundle farm (shared, read-only)."""
    from spatialqa.config import EngineConfig
    from spatialqa.corpus import emit_corpus

    base, roots = bundle_farm
    out = tmp_path_factory.mktemp("corpus") / "out"
    cfg = EngineConfig(
        bundles=[str(r) for r in roots],
        out_root=str(out),
        global_seed=11,
        frame_stride=1,
        train_per_subtask=14,
        eval_per_subtask=7,
        holdout_scenes=["roomb", "dync", "dynd"],
    )
    manifest = emit_corpus(cfg)
    return cfg, manifest, out
