"""Command-line front end: every pipeline stage as a subcommand, each a thin
shell over one library call chain. Data goes to files or stdout, diagnostics
to stderr. Exit codes: 0 success, 1 contract/format error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import blend, imagecore, inpaint, losses, maskops, morphable, render, synth
from .errors import DeoccError
from .imagecore import MaskF
from .losses import (GeneratorWeights, GrayProjectionEmbedding, NullDiscriminator,
                     OHEM_FRACTION_DEFAULT, standard_gradient_checks)

_LOSS_NAMES = ("dice", "bce", "coef", "pixel-l2", "id", "landmark", "l1-face",
               "ssim", "bg", "tv", "adv-g", "adv-d")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _load_mask(path: str, binarize: bool) -> MaskF:
    mask = imagecore.load_mask_png(path)
    return mask.threshold(0.5) if binarize else mask


def _require_files(args, names) -> None:
    for name in names:
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None and not Path(value).is_file():
            raise DeoccError(f"input file not found: {value}")


def _need(args, *names) -> None:
    for name in names:
        if getattr(args, name.replace("-", "_"), None) is None:
            raise DeoccError(f"loss {args.name!r} needs --{name}")
    _require_files(args, names)


def _coeffs_from_json(path: str | None, tz: float) -> morphable.CoeffVector:
    if path is None:
        return morphable.CoeffVector.build(translation=(0.0, 0.0, tz))
    values = json.loads(Path(path).read_text())
    return morphable.CoeffVector(np.asarray(values, dtype=np.float64))


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="deocc", description=__doc__, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toymodel", help="write a deterministic toy morphable model", formatter_class=fmt)
    p.add_argument("--rings", type=int, default=16, help="latitude rings of the toy mesh")
    p.add_argument("--seed", type=int, default=0, help="toy-model RNG seed")
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", help="rasterize a model under a coefficient vector", formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--coeffs", help="JSON file with 239 floats; default: zeros with --tz applied")
    p.add_argument("--tz", type=float, default=10.0, help="translation z used when --coeffs is absent")
    p.add_argument("--width", type=int, default=256, help="output width in pixels")
    p.add_argument("--height", type=int, default=256, help="output height in pixels")
    p.add_argument("--focal", type=float, default=render.FOCAL_DEFAULT, help="focal length in pixels")
    p.add_argument("--znear", type=float, default=0.1, help="near clip plane")
    p.add_argument("--out-image", required=True)
    p.add_argument("--out-mask")
    p.add_argument("--out-depth")
    p.add_argument("--out-landmarks")

    p = sub.add_parser("maskops", help="mask algebra on binary mask PNGs", formatter_class=fmt)
    p.add_argument("op", choices=("occlusion", "supervision", "background", "overlap"))
    p.add_argument("--mm", required=True, help="rendered-face mask PNG")
    p.add_argument("--mf", help="visible-face mask PNG")
    p.add_argument("--radius", type=float, default=maskops.EDGE_EROSION_RADIUS_DEFAULT,
                   help="erosion radius for the background op")
    p.add_argument("--binarize", action="store_true", help="threshold soft inputs at 0.5 first")
    p.add_argument("--out")

    p = sub.add_parser("noise", help="fill a region with clamped Gaussian noise", formatter_class=fmt)
    p.add_argument("--image", required=True)
    p.add_argument("--region", required=True)
    p.add_argument("--mean", type=float, default=imagecore.NOISE_MEAN_DEFAULT, help="noise mean")
    p.add_argument("--std", type=float, default=imagecore.NOISE_STDDEV_DEFAULT, help="noise stddev")
    p.add_argument("--seed", type=int, default=0, help="noise RNG seed")
    p.add_argument("--out", required=True)
    p.add_argument("--out-dtn")

    p = sub.add_parser("blend", help="Poisson-blend the visible face with the render", formatter_class=fmt)
    p.add_argument("--image", required=True, help="input image PNG (visible face source)")
    p.add_argument("--face-mask", required=True)
    p.add_argument("--render", required=True, help="rendered face PNG")
    p.add_argument("--render-mask", required=True)
    p.add_argument("--tol", type=float, default=blend.BLEND_TOL_DEFAULT, help="relative CG residual")
    p.add_argument("--max-iter", type=int, default=0, help="0 means 10x the unknown pixel count")
    p.add_argument("--out", required=True)
    p.add_argument("--out-dtn")

    p = sub.add_parser("synth", help="generate occluded-face training pairs", formatter_class=fmt)
    p.add_argument("--faces", required=True)
    p.add_argument("--occlusions", required=True)
    p.add_argument("--swatches")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True, help="samples to emit")
    p.add_argument("--seed", type=int, default=0, help="master seed; sample i derives from (seed, i)")
    p.add_argument("--swatch-prob", type=float, default=synth.SWATCH_PROB_DEFAULT,
                   help="probability of texture substitution per sample")
    p.add_argument("--workers", type=int, default=1, help="parallel workers; output is identical to serial")

    p = sub.add_parser("inpaint", help="optimize the composite objective over pixels", formatter_class=fmt)
    p.add_argument("--image", required=True)
    p.add_argument("--face-mask", required=True)
    p.add_argument("--render", required=True)
    p.add_argument("--render-mask", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--iters", type=int, default=500, help="optimizer iterations")
    p.add_argument("--step-size", type=float, default=inpaint.STEP_SIZE_DEFAULT, help="Adam step size")
    p.add_argument("--seed", type=int, default=0, help="noise/optimizer seed")
    p.add_argument("--ohem-fraction", type=float, default=OHEM_FRACTION_DEFAULT,
                   help="hard-pixel fraction for the mined losses")
    p.add_argument("--erosion-radius", type=float, default=maskops.EDGE_EROSION_RADIUS_DEFAULT,
                   help="edge erosion for the structural and background masks")
    p.add_argument("--embed-seed", type=int, default=0, help="built-in embedder seed")
    for name, default in (("pix", 10.0), ("sm", 5.0), ("bg", 5.0),
                          ("id", 0.2), ("tv", 0.1), ("adv", 0.01)):
        p.add_argument(f"--lambda-{name}", type=float, default=default,
                       help=f"weight of the {name} term")

    p = sub.add_parser("loss", help="evaluate one loss on file inputs", formatter_class=fmt)
    p.add_argument("name", choices=_LOSS_NAMES)
    p.add_argument("--pred", help="soft mask PNG (dice/bce) or coeff JSON (coef/landmark)")
    p.add_argument("--gt", help="binary mask PNG or coeff/landmark JSON")
    p.add_argument("--image", help="image under evaluation")
    p.add_argument("--target", help="reference image")
    p.add_argument("--mask", help="binary mask PNG")
    p.add_argument("--weights", help="JSON array of landmark weights")
    p.add_argument("--probs", help="JSON array of discriminator outputs")
    p.add_argument("--real", help="JSON array (adv-d)")
    p.add_argument("--fake", help="JSON array (adv-d)")
    p.add_argument("--fraction", type=float, default=OHEM_FRACTION_DEFAULT, help="hard-pixel fraction")
    p.add_argument("--embed-seed", type=int, default=0, help="built-in embedder seed")
    p.add_argument("--out-grad", help="write the gradient as DTN1")

    p = sub.add_parser("gradcheck", help="finite-difference check of every loss gradient", formatter_class=fmt)
    p.add_argument("--size", type=int, default=32, help="test image side length")
    p.add_argument("--probes", type=int, default=200, help="random coordinates per loss")
    p.add_argument("--step", type=float, default=1e-4, help="central-difference step")
    p.add_argument("--seed", type=int, default=0, help="probe/input seed")

    p = sub.add_parser("metrics", help="region L1/SSIM/PSNR plus identity cosine", formatter_class=fmt)
    p.add_argument("--image", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--region", required=True)
    p.add_argument("--embed-seed", type=int, default=0, help="built-in embedder seed")

    p = sub.add_parser("serve", help="run the HTTP service", formatter_class=fmt)
    p.add_argument("--host", default="127.0.0.1", help="bind address")
    p.add_argument("--port", type=int, default=8000, help="bind port")

    return parser


def _cmd_toymodel(args) -> int:
    model = morphable.toy_model(args.rings, args.seed)
    morphable.write_model(model, args.out)
    return 0


def _cmd_render(args) -> int:
    _require_files(args, ["model", "coeffs"])
    model = morphable.read_model(args.model)
    c = _coeffs_from_json(args.coeffs, args.tz)
    camera = render.Camera(args.focal, args.width / 2.0, args.height / 2.0,
                           args.width, args.height, args.znear)
    image, mask, depth, marks = render.render_from_coeffs(model, c, camera)
    imagecore.save_png(image, args.out_image)
    if args.out_mask:
        imagecore.save_mask_png(mask, args.out_mask)
    if args.out_depth:
        imagecore.write_tensor(depth, args.out_depth)
    if args.out_landmarks:
        Path(args.out_landmarks).write_text(json.dumps([list(row) for row in marks]) + "\n")
    return 0


def _cmd_maskops(args) -> int:
    _require_files(args, ["mm", "mf"])
    m_m = _load_mask(args.mm, args.binarize)
    if args.op == "background":
        result = maskops.background_mask(m_m, args.radius)
    else:
        if not args.mf:
            raise DeoccError(f"maskops {args.op} needs --mf")
        m_f = _load_mask(args.mf, args.binarize)
        if args.op == "occlusion":
            result = maskops.occlusion_mask(m_m, m_f)
        elif args.op == "supervision":
            result = maskops.supervision_mask(m_m, m_f)
        else:
            print(_fmt(maskops.overlap_rate(m_m, m_f)))
            return 0
    if not args.out:
        raise DeoccError(f"maskops {args.op} needs --out")
    imagecore.save_mask_png(result, args.out)
    return 0


def _cmd_noise(args) -> int:
    _require_files(args, ["image", "region"])
    image = imagecore.load_png(args.image)
    region = imagecore.load_mask_png(args.region).threshold(0.5)
    out = imagecore.gaussian_noise_fill(image, region, args.mean, args.std, args.seed)
    imagecore.save_png(out, args.out)
    if args.out_dtn:
        imagecore.write_tensor(out, args.out_dtn)
    return 0


def _cmd_blend(args) -> int:
    _require_files(args, ["image", "face-mask", "render", "render-mask"])
    i_f = imagecore.load_png(args.image)
    m_f = imagecore.load_mask_png(args.face_mask).threshold(0.5)
    i_m = imagecore.load_png(args.render)
    m_m = imagecore.load_mask_png(args.render_mask).threshold(0.5)
    result = blend.poisson_blend(i_f, m_f, i_m, m_m, args.tol,
                                 args.max_iter if args.max_iter > 0 else None)
    imagecore.save_png(result, args.out)
    if args.out_dtn:
        imagecore.write_tensor(result, args.out_dtn)
    return 0


def _cmd_synth(args) -> int:
    manifest = synth.generate_pairs(args.faces, args.occlusions, args.swatches,
                                    args.out, args.count, args.seed,
                                    args.swatch_prob, args.workers)
    print(str(manifest))
    return 0


def _cmd_inpaint(args) -> int:
    _require_files(args, ["image", "face-mask", "render", "render-mask"])
    image = imagecore.load_png(args.image)
    m_f = imagecore.load_mask_png(args.face_mask).threshold(0.5)
    i_m = imagecore.load_png(args.render)
    m_m = imagecore.load_mask_png(args.render_mask).threshold(0.5)
    weights = GeneratorWeights(args.lambda_pix, args.lambda_sm, args.lambda_bg,
                               args.lambda_id, args.lambda_tv, args.lambda_adv)
    opt = inpaint.OptimizerParams(step_size=args.step_size, iterations=args.iters,
                                  seed=args.seed, ohem_fraction=args.ohem_fraction)
    problem = inpaint.prepare(image, m_f, i_m, m_m, noise_seed=args.seed,
                              erosion_radius=args.erosion_radius,
                              weights=weights, opt=opt)
    embed = GrayProjectionEmbedding(seed=args.embed_seed)
    i_hat, trace = inpaint.solve(problem, embed, NullDiscriminator())

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    imagecore.save_png(i_hat, out / "ihat.png")
    imagecore.write_tensor(i_hat, out / "ihat.dtn")
    imagecore.save_mask_png(problem.m_o, out / "mo.png")
    imagecore.save_png(problem.i_n, out / "in.png")
    imagecore.save_png(problem.i_p, out / "ip.png")
    with (out / "trace.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("iter",) + trace.columns)
        for i, row in enumerate(trace.rows):
            writer.writerow((i,) + tuple(_fmt(v) for v in row))
    return 0


def _cmd_loss(args) -> int:
    name = args.name
    report = None
    if name in ("dice", "bce"):
        _need(args, "pred", "gt")
        pred = imagecore.load_mask_png(args.pred)
        gt = imagecore.load_mask_png(args.gt).threshold(0.5)
        report = (losses.dice_loss(pred, gt) if name == "dice"
                  else losses.bce_ohem_loss(pred, gt, args.fraction))
    elif name == "coef":
        _need(args, "pred", "gt")
        c_hat = _coeffs_from_json(args.pred, 0.0)
        c_gt = _coeffs_from_json(args.gt, 0.0)
        report = losses.coef_loss(c_hat, c_gt)
    elif name == "landmark":
        _need(args, "pred", "gt")
        q_hat = np.asarray(json.loads(Path(args.pred).read_text()), dtype=np.float64)
        q = np.asarray(json.loads(Path(args.gt).read_text()), dtype=np.float64)
        w = (np.asarray(json.loads(Path(args.weights).read_text()), dtype=np.float64)
             if args.weights else np.ones(q.shape[0]))
        report = losses.landmark_loss(q_hat, q, w)
    elif name in ("pixel-l2", "l1-face", "ssim", "bg"):
        _need(args, "image", "target", "mask")
        image = imagecore.load_png(args.image)
        target = imagecore.load_png(args.target)
        mask = imagecore.load_mask_png(args.mask).threshold(0.5)
        if name == "pixel-l2":
            report = losses.masked_pixel_l2(image, target, mask)
        elif name == "l1-face":
            report = losses.pixel_l1_face(image, target, mask)
        elif name == "bg":
            report = losses.background_loss(image, target, mask)
        else:
            report = losses.ssim_ohem_loss(image, target, mask, args.fraction)
    elif name == "id":
        _need(args, "image", "target")
        embed = GrayProjectionEmbedding(seed=args.embed_seed)
        report = losses.identity_loss(imagecore.load_png(args.image),
                                      imagecore.load_png(args.target), embed)
    elif name == "tv":
        _need(args, "image")
        report = losses.tv_loss(imagecore.load_png(args.image))
    elif name == "adv-g":
        _need(args, "probs")
        probs = np.asarray(json.loads(Path(args.probs).read_text()), dtype=np.float64)
        report = losses.adversarial_g_loss(probs)
    elif name == "adv-d":
        _need(args, "real", "fake")
        real = np.asarray(json.loads(Path(args.real).read_text()), dtype=np.float64)
        fake = np.asarray(json.loads(Path(args.fake).read_text()), dtype=np.float64)
        report = losses.adversarial_d_loss(real, fake)
    print(_fmt(report.value))
    if args.out_grad and isinstance(report.gradient, np.ndarray):
        imagecore.write_tensor(np.atleast_3d(report.gradient), args.out_grad)
    return 0


def _cmd_gradcheck(args) -> int:
    results = standard_gradient_checks(args.size, args.probes, args.step, args.seed)
    worst = 0.0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name}\t{r.max_rel_err:.3e}\t{status}")
        worst = max(worst, r.max_rel_err)
    print(f"# worst max_rel_err {worst:.3e}", file=sys.stderr)
    return 0 if all(r.passed for r in results) else 1


def _cmd_metrics(args) -> int:
    _require_files(args, ["image", "reference", "region"])
    embed = GrayProjectionEmbedding(seed=args.embed_seed)
    result = inpaint.region_metrics(imagecore.load_png(args.image),
                                    imagecore.load_png(args.reference),
                                    imagecore.load_mask_png(args.region).threshold(0.5),
                                    embed)
    print("\t".join(_fmt(result[k]) for k in ("l1", "ssim", "psnr", "id")))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn
    from .service.app import app
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_HANDLERS = {
    "toymodel": _cmd_toymodel,
    "render": _cmd_render,
    "maskops": _cmd_maskops,
    "noise": _cmd_noise,
    "blend": _cmd_blend,
    "synth": _cmd_synth,
    "inpaint": _cmd_inpaint,
    "loss": _cmd_loss,
    "gradcheck": _cmd_gradcheck,
    "metrics": _cmd_metrics,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (DeoccError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
