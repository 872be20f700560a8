"""Paired desk run: two-stage pipeline vs 32-block joint network at one noise level.

    python3 scripts/two_stage_vs_joint.py --iters 400 --sigma 20
"""

import argparse
import json
import logging

from rawpipe.data import desk_corpus
from rawpipe.experiments import DESK, two_stage_vs_joint


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma", type=float, default=20.0)
    ap.add_argument("--iters", type=int, default=DESK.max_iters)
    ap.add_argument("--images", type=int, default=200)
    ap.add_argument("--patch", type=int, default=DESK.patch_size)
    ap.add_argument("--lr", type=float, default=DESK.lr0)
    ap.add_argument("--blocks", type=int, default=DESK.n_blocks, help="stage depth; joint gets twice")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="write the result as JSON here")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = DESK.replace(max_iters=args.iters, patch_size=args.patch, lr0=args.lr, seed=args.seed,
                      n_blocks=args.blocks)
    images = [im for _, im in desk_corpus(args.images, seed=args.seed)]
    res = two_stage_vs_joint(images, args.sigma, cfg)
    print(res.summary())
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(res.__dict__, fh, indent=2)


if __name__ == "__main__":
    main()
