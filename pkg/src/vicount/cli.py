"""Command line front end.

Subcommands: simulate (generate a synthetic stream file), count (memory-based
counting over a stream), eval (aggregate count reports into metrics), loss
(pairwise and total matching loss of a labeled stream), gradcheck (compare
the analytic loss gradient against finite differences), pseudo (export hard
matchings recovered from the soft plans).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .counting import McpConfig, count_video
from .errors import DataError, NumericalError
from .loss import (
    LossConfig,
    frozen_plan_loss,
    hinge_loss,
    loss_gradient,
    pseudo_trajectories,
    soft_contrastive_loss,
)
from .metrics import VideoResult, mae, mse, wrae
from .simulate import SimConfig, generate_scene, gt_unique_count
from .stream import SimilarityBlocks, pair_blocks, random_similarity_blocks
from .streamio import parse_stream, write_stream


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(x: float) -> str:
    return f"{float(x):.9g}"


def _add_loss_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma-scale", type=float, default=10.0,
                   help="similarity scale inside the contrastive exponential (default 10)")
    p.add_argument("--theta", type=float, default=0.2,
                   help="hinge threshold on outflow/inflow similarities (default 0.2)")
    p.add_argument("--reg", type=float, default=0.05,
                   help="entropic regularization of the transport solver (default 0.05)")
    p.add_argument("--iters", type=int, default=500,
                   help="transport solver iteration budget (default 500)")
    p.add_argument("--tol", type=float, default=1e-6,
                   help="transport marginal tolerance (default 1e-6)")


def _loss_config(args) -> LossConfig:
    return LossConfig(
        temperature=args.gamma_scale,
        hinge_threshold=args.theta,
        sinkhorn_reg=args.reg,
        sinkhorn_max_iters=args.iters,
        sinkhorn_tol=args.tol,
    )


def _cmd_simulate(args) -> int:
    cfg = SimConfig(
        num_identities=args.identities,
        num_frames=args.frames,
        delta=args.delta,
        feature_dim=args.dim,
        feature_noise_sigma=args.noise_sigma,
        reentry_probability=args.reentry_prob,
        scene_size=(args.scene_width, args.scene_height),
        walk_step_sigma=args.walk_sigma,
        max_base_similarity=args.max_base_sim,
        seed=args.seed,
    )
    stream = generate_scene(cfg)
    write_stream(stream, args.out)
    print(
        f"simulated {len(stream)} frames, {gt_unique_count(stream)} identities -> {args.out}"
    )
    return 0


def _cmd_count(args) -> int:
    cfg = McpConfig(
        zeta=args.zeta,
        ttl_max=args.ttlmax,
        mem_max=args.memmax,
        template_aggregator=args.aggregator,
    )
    stream = parse_stream(args.infile)
    report = count_video(stream, cfg)
    try:
        gt_total = gt_unique_count(stream)
    except DataError:
        gt_total = None
    video_id = args.video_id if args.video_id else Path(args.infile).stem
    print(f"total {report.total}")
    if args.report:
        payload = {
            "video": video_id,
            "frames": len(stream),
            "delta": stream.delta,
            "total": report.total,
            "gt_total": gt_total,
            "per_step": [
                {
                    "frame": rec.frame_index,
                    "inflow": rec.inflow,
                    "associations": [list(a) for a in rec.associations],
                    "new_entries": list(rec.new_entry_ids),
                }
                for rec in report.per_step
            ],
        }
        with open(args.report, "w", encoding="ascii") as fh:
            json.dump(payload, fh, separators=(",", ":"))
            fh.write("\n")
        print(f"report -> {args.report}")
    return 0


def _cmd_eval(args) -> int:
    gt_map = {}
    if args.gt:
        with open(args.gt, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise DataError(f"{args.gt}: ground-truth file must be a JSON object")
        gt_map = {str(k): v for k, v in raw.items()}
    results = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as fh:
            rep = json.load(fh)
        for key in ("video", "frames", "total"):
            if key not in rep:
                raise DataError(f"{path}: report missing key {key!r}")
        video = str(rep["video"])
        gt = gt_map.get(video, rep.get("gt_total"))
        if gt is None:
            raise DataError(f"{path}: no ground-truth count for video {video!r}")
        results.append(VideoResult(video, rep["frames"], gt, rep["total"]))
    print("video\tframes\tgt\tpred")
    for r in results:
        print(f"{r.video_id}\t{_fmt(r.length)}\t{r.gt_count}\t{_fmt(r.pred_count)}")
    print(f"MAE {_fmt(mae(results))}")
    print(f"MSE {_fmt(mse(results))}")
    print(f"WRAE {_fmt(wrae(results))}%")
    return 0


def _cmd_loss(args) -> int:
    cfg = _loss_config(args)
    stream = parse_stream(args.infile)
    blocks_list = pair_blocks(stream)
    total = 0.0
    for blocks, (prev, curr) in zip(blocks_list, zip(stream.frames, stream.frames[1:])):
        sc = soft_contrastive_loss(blocks, cfg)
        hl = hinge_loss(blocks.s3, cfg.hinge_threshold)
        total += sc.loss + hl
        print(
            f"pair {prev.frame_index}->{curr.frame_index}: m={blocks.m} "
            f"scon={_fmt(sc.loss)} hinge={_fmt(hl)} "
            f"converged={sc.plan.converged} iters={sc.plan.iterations_used}"
        )
    print(f"total {_fmt(total)}")
    return 0


def _fd_gradient(blocks: SimilarityBlocks, cfg: LossConfig, omega, h: float) -> np.ndarray:
    base = blocks.full
    out = np.empty_like(base)
    for p in range(base.shape[0]):
        for q in range(base.shape[1]):
            plus = base.copy()
            plus[p, q] += h
            minus = base.copy()
            minus[p, q] -= h
            f_plus = frozen_plan_loss(SimilarityBlocks.from_full(plus, blocks.m), omega, cfg)
            f_minus = frozen_plan_loss(SimilarityBlocks.from_full(minus, blocks.m), omega, cfg)
            out[p, q] = (f_plus - f_minus) / (2 * h)
    return out


def _max_rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-6)
    return float(np.max(np.abs(analytic - fd) / scale))


def _cmd_gradcheck(args) -> int:
    cfg = _loss_config(args)
    blocks_list = []
    if args.infile:
        blocks_list = [b for b in pair_blocks(parse_stream(args.infile)) if b.m > 0]
        if not blocks_list:
            raise DataError("stream has no adjacent pair with shared individuals")
    else:
        rng = np.random.default_rng(args.seed)
        while len(blocks_list) < args.trials:
            n_i = int(rng.integers(1, args.max_rows + 1))
            n_j = int(rng.integers(1, args.max_cols + 1))
            m = int(rng.integers(1, min(n_i, n_j) + 1))
            blocks = random_similarity_blocks(rng, n_i, n_j, m)
            # Finite differences need the hinge to be locally smooth.
            if blocks.s3.size and np.any(np.abs(blocks.s3 - cfg.hinge_threshold) < 1e-3):
                continue
            blocks_list.append(blocks)
    worst = 0.0
    for blocks in blocks_list:
        omega = soft_contrastive_loss(blocks, cfg).plan.omega
        analytic = loss_gradient(blocks, cfg)
        fd = _fd_gradient(blocks, cfg, omega, args.step)
        worst = max(worst, _max_rel_err(analytic, fd))
    print(f"checked {len(blocks_list)} blocks, max relative error {worst:.3e}")
    if args.fail_above is not None and worst > args.fail_above:
        raise NumericalError(
            f"gradient mismatch: {worst:.3e} exceeds {args.fail_above:.3e}"
        )
    return 0


def _cmd_pseudo(args) -> int:
    cfg = _loss_config(args)
    stream = parse_stream(args.infile)
    result = pseudo_trajectories(stream, cfg)
    lines = []
    for pm in result.pairs:
        lines.append(json.dumps(
            {"pair": [pm.frame_prev, pm.frame_curr],
             "matches": [list(m) for m in pm.matches]},
            separators=(",", ":"),
        ))
    for t_idx, traj in enumerate(result.trajectories):
        lines.append(json.dumps(
            {"traj": t_idx, "steps": [list(s) for s in traj]},
            separators=(",", ":"),
        ))
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))
        print(
            f"wrote {len(result.pairs)} pairs, {len(result.trajectories)} trajectories "
            f"-> {args.out}"
        )
    else:
        for line in lines:
            print(line)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="vicount", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic labeled stream file")
    p.add_argument("--identities", type=int, default=20)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--delta", type=float, default=3.0)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--reentry-prob", type=float, default=0.0)
    p.add_argument("--scene-width", type=float, default=1920.0)
    p.add_argument("--scene-height", type=float, default=1080.0)
    p.add_argument("--walk-sigma", type=float, default=5.0)
    p.add_argument("--max-base-sim", type=float, default=None,
                   help="rejection-sample base features below this pairwise similarity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("count", help="count individuals in a stream with the template memory")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--zeta", type=float, default=0.7,
                   help="association cost threshold (default 0.7)")
    p.add_argument("--ttlmax", type=int, default=3,
                   help="steps an unmatched individual stays matchable (default 3)")
    p.add_argument("--memmax", type=int, default=5,
                   help="templates kept per individual (default 5)")
    p.add_argument("--aggregator", choices=("max", "min", "mean"), default="max")
    p.add_argument("--video-id", default=None)
    p.add_argument("--report", default=None, help="write a JSON report here")
    p.set_defaults(func=_cmd_count)

    p = sub.add_parser("eval", help="aggregate count reports into MAE/MSE/WRAE")
    p.add_argument("reports", nargs="+", help="JSON report files from the count subcommand")
    p.add_argument("--gt", default=None,
                   help="JSON object mapping video id to ground-truth count")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("loss", help="pairwise and total matching loss of a labeled stream")
    p.add_argument("--in", dest="infile", required=True)
    _add_loss_flags(p)
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("gradcheck", help="compare the analytic gradient to finite differences")
    p.add_argument("--in", dest="infile", default=None,
                   help="check the pairs of this stream instead of random blocks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--max-rows", type=int, default=6)
    p.add_argument("--max-cols", type=int, default=8)
    p.add_argument("--step", type=float, default=1e-5, help="finite difference step")
    p.add_argument("--fail-above", type=float, default=None,
                   help="exit with an error if the max relative error exceeds this")
    _add_loss_flags(p)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("pseudo", help="export hard matchings recovered from the soft plans")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None, help="write JSON lines here instead of stdout")
    _add_loss_flags(p)
    p.set_defaults(func=_cmd_pseudo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"vicount: numerical error: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"vicount: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"vicount: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
