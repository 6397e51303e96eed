"""Command-line entry point.

Examples
--------
Synthetic run::

    hsi-anchor --synthetic 32,32,16,3,8,1 --out runs/synth

User-supplied cube::

    hsi-anchor --input ip.bsq --header ip.json --labels ip_gt.csv --train-frac 0.05
"""
import argparse
import logging
import sys

from .ensemble import EnsembleConfig
from .features import LbpParams
from .hsi_io import SyntheticSpec
from .pipeline import RunConfig, run_pipeline


def _synthetic(text):
    parts = text.split(",")
    if len(parts) not in (6, 7):
        raise argparse.ArgumentTypeError("expected w,h,b,c,sep,sigma[,stripes|blocks]")
    try:
        w, h, b, c = (int(p) for p in parts[:4])
        sep, sigma = float(parts[4]), float(parts[5])
        layout = parts[6] if len(parts) == 7 else "stripes"
        return SyntheticSpec(w, h, b, c, sep, sigma, layout)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    p = argparse.ArgumentParser(
        prog="hsi-anchor",
        description="Semi-supervised hyperspectral classification with an ensemble "
                    "of random-subspace anchor graphs.",
    )
    src = p.add_argument_group("input")
    src.add_argument("--input", help="raw float32 band-sequential cube")
    src.add_argument("--header", help="JSON header for --input")
    src.add_argument("--labels", help="ground-truth CSV (0 = background)")
    src.add_argument("--synthetic", type=_synthetic, metavar="W,H,B,C,SEP,SIGMA[,LAYOUT]",
                     help="generate a synthetic cube instead of reading files")

    p.add_argument("--train-frac", type=float, default=0.05,
                   help="fraction of each class used for training (default: 0.05)")
    p.add_argument("--bands", type=int, default=None,
                   help="bands kept by LPE selection (default: min(20, bands))")
    p.add_argument("--kg", type=int, default=4, help="ensemble members (default: 4)")
    p.add_argument("--kss", type=int, default=96,
                   help="feature columns per member, clamped to the feature dimension (default: 96)")
    p.add_argument("--anchors", type=int, default=None,
                   help="anchors per member (default: min(1000, ceil(n/10)))")
    p.add_argument("--knn", type=int, default=5, help="active anchors per pixel (default: 5)")
    p.add_argument("--alpha", type=float, default=0.01, help="smoothness weight (default: 0.01)")
    p.add_argument("--window", type=int, default=7, help="LBP histogram window (default: 7)")
    p.add_argument("--lbp-neighbors", type=int, default=8, choices=(4, 8, 16))
    p.add_argument("--lbp-radius", type=float, default=1.0)
    p.add_argument("--lbp-mapping", default="uniform_u2", choices=("uniform_u2", "raw"))
    p.add_argument("--lbp-sampling", default="grid", choices=("grid", "bilinear"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="parallel ensemble members (default: 1)")
    p.add_argument("--include-train", action="store_true",
                   help="count training pixels in the metrics")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args):
    lbp = LbpParams(args.lbp_neighbors, args.lbp_radius, args.window, args.lbp_mapping,
                    args.lbp_sampling)
    ens = EnsembleConfig(k_g=args.kg, k_ss=args.kss, m=args.anchors, k=args.knn,
                         alpha=args.alpha, lbp=lbp, seed=args.seed, n_jobs=args.jobs)
    return RunConfig(
        cube_path=args.input, header_path=args.header, labels_path=args.labels,
        synthetic=args.synthetic, train_fraction=args.train_frac, n_bands=args.bands,
        ensemble=ens, out_dir=args.out, seed=args.seed,
        include_train_in_metrics=args.include_train,
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        report = run_pipeline(config_from_args(args))
    except Exception as exc:
        print(f"hsi-anchor: error: {exc}", file=sys.stderr)
        return 1
    if report["oa"] is not None:
        print(f"OA={report['oa']:.4f} AA={report['aa']:.4f} kappa={report['kappa']:.4f} "
              f"time={report['time_s']:.2f}s -> {args.out}")
    else:
        print(f"no evaluation pixels; maps written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
