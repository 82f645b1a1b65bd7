"""FastAPI service wrapping the pipeline; every endpoint is a thin shell over
one library call chain, mirroring the CLI subcommands."""

from __future__ import annotations

import base64

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, blend, inpaint, losses, maskops, morphable, render, synth
from ..errors import DeoccError
from ..morphable import CoeffVector
from . import schemas as s

app = FastAPI(title="deocc", description="Face de-occlusion pipeline core", version=__version__)


@app.exception_handler(DeoccError)
async def _deocc_error(request: Request, exc: DeoccError) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.get("/health", response_model=s.HealthResponse)
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/masks/occlusion", response_model=s.MaskResponse)
def mask_occlusion(req: s.MaskPairRequest) -> dict:
    result = maskops.occlusion_mask(s.decode_mask(req.render_mask), s.decode_mask(req.face_mask))
    return {"mask": s.encode_tensor(result.data)}


@app.post("/masks/supervision", response_model=s.MaskResponse)
def mask_supervision(req: s.MaskPairRequest) -> dict:
    result = maskops.supervision_mask(s.decode_mask(req.render_mask), s.decode_mask(req.face_mask))
    return {"mask": s.encode_tensor(result.data)}


@app.post("/masks/background", response_model=s.MaskResponse)
def mask_background(req: s.BackgroundMaskRequest) -> dict:
    result = maskops.background_mask(s.decode_mask(req.render_mask), req.erosion_radius)
    return {"mask": s.encode_tensor(result.data)}


@app.post("/masks/overlap", response_model=s.OverlapResponse)
def mask_overlap(req: s.MaskPairRequest) -> dict:
    rate = maskops.overlap_rate(s.decode_mask(req.render_mask), s.decode_mask(req.face_mask))
    return {"rate": rate}


@app.post("/noise/fill", response_model=s.ImageResponse)
def noise_fill(req: s.NoiseRequest) -> dict:
    from ..imagecore import gaussian_noise_fill
    out = gaussian_noise_fill(s.decode_image(req.image), s.decode_mask(req.region),
                              req.mean, req.stddev, req.seed)
    return {"image": s.encode_tensor(out.data)}


@app.post("/blend/poisson", response_model=s.ImageResponse)
def blend_poisson(req: s.BlendRequest) -> dict:
    out = blend.poisson_blend(s.decode_image(req.image), s.decode_mask(req.face_mask),
                              s.decode_image(req.render), s.decode_mask(req.render_mask),
                              req.tol, req.max_iter)
    return {"image": s.encode_tensor(out.data)}


@app.post("/model/toy", response_model=s.ToyModelResponse)
def model_toy(req: s.ToyModelRequest) -> dict:
    model = morphable.toy_model(req.rings, req.seed)
    return {"model": base64.b64encode(morphable.model_to_bytes(model)).decode("ascii"),
            "vertex_count": model.vertex_count,
            "triangle_count": model.triangle_count}


def _model_from_b64(payload: str) -> morphable.MorphableModel:
    return morphable.model_from_bytes(base64.b64decode(payload))


@app.post("/render", response_model=s.RenderResponse)
def render_coeffs(req: s.RenderRequest) -> dict:
    model = _model_from_b64(req.model)
    c = CoeffVector(np.asarray(req.coeffs, dtype=np.float64))
    camera = render.Camera(req.focal, req.width / 2.0, req.height / 2.0,
                           req.width, req.height, req.z_near)
    image, mask, depth, marks = render.render_from_coeffs(model, c, camera)
    return {"image": s.encode_tensor(image.data),
            "mask": s.encode_tensor(mask.data),
            "depth": s.encode_tensor(depth),
            "landmarks": [list(row) for row in marks]}


@app.post("/loss", response_model=s.LossResponse)
def loss(req: s.LossRequest) -> dict:
    name = req.name
    if name == "dice":
        report = losses.dice_loss(s.decode_mask(req.pred), s.decode_mask(req.gt))
    elif name == "bce":
        report = losses.bce_ohem_loss(s.decode_mask(req.pred), s.decode_mask(req.gt), req.fraction)
    elif name == "coef":
        report = losses.coef_loss(CoeffVector(np.asarray(req.coeff_pred)),
                                  CoeffVector(np.asarray(req.coeff_gt)))
    elif name == "landmark":
        q_hat = np.asarray(req.landmarks_pred, dtype=np.float64)
        q = np.asarray(req.landmarks_gt, dtype=np.float64)
        w = (np.asarray(req.landmark_weights, dtype=np.float64)
             if req.landmark_weights else np.ones(q.shape[0]))
        report = losses.landmark_loss(q_hat, q, w)
    elif name == "pixel-l2":
        report = losses.masked_pixel_l2(s.decode_image(req.image), s.decode_image(req.target),
                                        s.decode_mask(req.mask))
    elif name == "l1-face":
        report = losses.pixel_l1_face(s.decode_image(req.image), s.decode_image(req.target),
                                      s.decode_mask(req.mask))
    elif name == "bg":
        report = losses.background_loss(s.decode_image(req.image), s.decode_image(req.target),
                                        s.decode_mask(req.mask))
    elif name == "ssim":
        report = losses.ssim_ohem_loss(s.decode_image(req.image), s.decode_image(req.target),
                                       s.decode_mask(req.mask), req.fraction)
    elif name == "id":
        embed = losses.GrayProjectionEmbedding(seed=req.embed_seed)
        report = losses.identity_loss(s.decode_image(req.image), s.decode_image(req.target), embed)
    elif name == "tv":
        report = losses.tv_loss(s.decode_image(req.image))
    elif name == "adv-g":
        report = losses.adversarial_g_loss(np.asarray(req.probs, dtype=np.float64))
    elif name == "adv-d":
        report = losses.adversarial_d_loss(np.asarray(req.real, dtype=np.float64),
                                           np.asarray(req.fake, dtype=np.float64))
    else:
        raise DeoccError(f"unknown loss {name!r}")
    gradient = None
    if req.want_gradient and isinstance(report.gradient, np.ndarray):
        gradient = s.encode_tensor(np.atleast_3d(report.gradient))
    return {"value": report.value, "gradient": gradient}


@app.post("/inpaint", response_model=s.InpaintResponse)
def run_inpaint(req: s.InpaintRequest) -> dict:
    weights = losses.GeneratorWeights(req.lambda_pix, req.lambda_sm, req.lambda_bg,
                                      req.lambda_id, req.lambda_tv, req.lambda_adv)
    opt = inpaint.OptimizerParams(step_size=req.step_size, iterations=req.iterations,
                                  seed=req.seed, ohem_fraction=req.ohem_fraction)
    problem = inpaint.prepare(s.decode_image(req.image), s.decode_mask(req.face_mask),
                              s.decode_image(req.render), s.decode_mask(req.render_mask),
                              noise_seed=req.seed, erosion_radius=req.erosion_radius,
                              weights=weights, opt=opt)
    embed = losses.GrayProjectionEmbedding(seed=req.embed_seed)
    i_hat, trace = inpaint.solve(problem, embed, losses.NullDiscriminator())
    return {"image": s.encode_tensor(i_hat.data),
            "occlusion_mask": s.encode_tensor(problem.m_o.data),
            "noised_input": s.encode_tensor(problem.i_n.data),
            "blend_target": s.encode_tensor(problem.i_p.data),
            "trace": trace.totals}


@app.post("/synth/composite", response_model=s.CompositeResponse)
def synth_composite(req: s.CompositeRequest) -> dict:
    patch = synth.OcclusionPatch(s.decode_image(req.patch_texture),
                                 s.decode_mask(req.patch_alpha), "payload")
    placement = synth.PlacementParams(req.scale, req.rotation, req.dx, req.dy)
    face = s.decode_image(req.face)
    image, m_gt = synth.composite(face, s.decode_mask(req.face_mask), patch, placement)
    m_o = synth.occlusion_mask_of(face, patch, placement)
    return {"image": s.encode_tensor(image.data),
            "face_mask": s.encode_tensor(m_gt.data),
            "occlusion_mask": s.encode_tensor(m_o.data)}


@app.post("/metrics", response_model=s.MetricsResponse)
def metrics(req: s.MetricsRequest) -> dict:
    embed = losses.GrayProjectionEmbedding(seed=req.embed_seed)
    return inpaint.region_metrics(s.decode_image(req.image), s.decode_image(req.reference),
                                  s.decode_mask(req.region), embed)
