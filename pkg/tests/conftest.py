"""Shared fixtures: toy model, cameras, and the frozen desk-demo scene."""

from __future__ import annotations

import numpy as np
import pytest

from deocc import inpaint, morphable, render, synth
from deocc.imagecore import ImageF, MaskF
from deocc.losses import GrayProjectionEmbedding, NullDiscriminator


@pytest.fixture(scope="session")
def toy():
    return morphable.toy_model(16, 0)


@pytest.fixture(scope="session")
def camera128():
    return render.Camera.centered(128, 128, focal=550.0)


@pytest.fixture(scope="session")
def demo_scene(toy, camera128):
    """Frozen end-to-end scene: ground-truth render, perturbed reconstruction,
    and a 32×32 opaque patch occluding the face."""
    c_gt = morphable.CoeffVector.build(
        translation=(0, 0, 10),
        illumination=[0.9 / render.SH_C0, 0.1, 0.05, 0.2, 0, 0, 0, 0, 0])
    i_gt, m_m_gt, _, _ = render.render_from_coeffs(toy, c_gt, camera128)

    rng = np.random.default_rng(5)
    c_arr = np.array(c_gt.data)
    c_arr[6:150] += rng.normal(0, 0.01, 144)
    c_arr[150:230] += rng.normal(0, 0.05, 80)
    c_arr[230:] += rng.normal(0, 0.2, 9)
    i_m, m_m, _, _ = render.render_from_coeffs(toy, morphable.CoeffVector(c_arr), camera128)

    patch = synth.OcclusionPatch(
        ImageF(np.broadcast_to(np.array([0.1, 0.6, 0.2]), (32, 32, 3))),
        MaskF(np.ones((32, 32))), "square")
    placement = synth.PlacementParams(1.0, 0.0, 0.0, -8.0)
    occluded, m_f = synth.composite(i_gt, m_m_gt, patch, placement)
    return {
        "i_gt": i_gt, "m_m_gt": m_m_gt, "i_m": i_m, "m_m": m_m,
        "occluded": occluded, "m_f": m_f, "patch": patch, "placement": placement,
    }


@pytest.fixture(scope="session")
def demo_solution(demo_scene):
    """One full 500-iteration solve of the demo scene (shared: it is the
    expensive part of the suite)."""
    problem = inpaint.prepare(
        demo_scene["occluded"], demo_scene["m_f"], demo_scene["i_m"], demo_scene["m_m"],
        opt=inpaint.OptimizerParams(iterations=500))
    embed = GrayProjectionEmbedding(seed=0)
    import time
    t0 = time.time()
    i_hat, trace = inpaint.solve(problem, embed, NullDiscriminator())
    elapsed = time.time() - t0
    return {"problem": problem, "i_hat": i_hat, "trace": trace,
            "embed": embed, "elapsed": elapsed}
