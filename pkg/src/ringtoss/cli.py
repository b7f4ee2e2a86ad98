"""Command line driver.

Exit codes: 0 success, 2 input error, 3 statistical or bound regression.
Randomised commands print the effective seed on the first line.
"""

import argparse
import csv
import json
import math
import os
import secrets
import sys
import time

import numpy as np

from .codec import Bitstring, decode, encode, measure_rate, naive_geometric_length
from .exceptions import Exhausted, MalformedCodeword, RingTossError, TooLarge
from .gaussbench import (AwgnModel, Gauss1D, awgn_demo, figure1_rows, gaussian_csd, gaussian_kl,
                         write_rows_csv)
from .probcore import build_joint, detect_singular, mutual_information, preset_joint
from .product import redundancy_curve, write_redundancy_csv
from .sampler import CommonRandomness, rejection_index, simulate_batch
from .verify import GOF_ALPHA, chi_square_pvalue, run_checks
from .widthfn import LOG2_E, cross_entropy_oracle, functional_information

EXIT_OK, EXIT_INPUT, EXIT_REGRESSION = 0, 2, 3


class InputError(Exception):
    pass


def load_spec_file(path):
    """Read a JSON channel file with fields ``px`` and ``pygx``."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object with fields px and pygx")
    for field in ("px", "pygx"):
        if field not in doc:
            raise InputError(f"{path}: missing field '{field}'")
    try:
        px = np.asarray(doc["px"], dtype=float)
        pygx = np.asarray(doc["pygx"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: field px/pygx must hold numbers ({exc})") from None
    if px.ndim != 1:
        raise InputError(f"{path}: field 'px' must be a flat array")
    if pygx.ndim != 2:
        raise InputError(f"{path}: field 'pygx' must be an array of equal-length rows")
    try:
        return build_joint(px, pygx)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def _joint(args):
    if getattr(args, "spec", None):
        return load_spec_file(args.spec)
    try:
        return preset_joint(args.preset)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _seed(args):
    seed = args.seed if args.seed is not None else secrets.randbits(63)
    print(f"seed: {seed}")
    return seed


def _add_channel(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--preset", help="bsc:<p>, bec:<eps>, identity:<k> or uniform-additive:<k>:<w>")
    g.add_argument("--spec", help="JSON file with fields px and pygx")


def _check_x(j, x):
    if not 0 <= x < j.n_inputs or not j.px[x] > 0:
        raise InputError(f"--x {x} is not an input symbol with positive probability")


def info_report(j):
    i_f = functional_information(j)
    ce = cross_entropy_oracle(j)
    return {
        "mi": mutual_information(j),
        "i_f": i_f,
        "cross_entropy": ce,
        "theorem1_gap": ce - i_f,
        "naive_geometric_length": naive_geometric_length(j.bound_m),
        "bound_m": float(j.bound_m),
        "is_singular": detect_singular(j).is_singular,
    }


def cmd_info(args):
    rep = info_report(_joint(args))
    for key, val in rep.items():
        print(f"{key}: {val:.12g}" if isinstance(val, float) else f"{key}: {val}")
    print(f"I_F <= H* <= I_F + log2 e: [{rep['i_f']:.6f}, {rep['i_f'] + LOG2_E:.6f}]")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(rep))
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in rep.values()])
    return EXIT_OK


def cmd_simulate(args):
    j = _joint(args)
    _check_x(j, args.x)
    if args.trials < 100:
        raise InputError("--trials must be at least 100")
    seed = _seed(args)
    res = simulate_batch(j, args.x, args.trials, seed)
    pval = chi_square_pvalue(res.y_counts, np.asarray(j.channel[args.x], dtype=float))
    rate = measure_rate(j, args.trials, seed)
    print(f"x: {args.x}  trials: {args.trials}")
    print(f"output counts: {' '.join(str(int(c)) for c in res.y_counts)}")
    print(f"chi-square p-value: {pval:.6g}")
    print(f"mean K: {res.k_mean:.6g} (M = {float(j.bound_m):.6g})")
    print(f"mean length: {rate.mean_length:.6g} +- {rate.length_stderr:.2g} bits")
    print(f"cross-entropy estimate: {rate.cross_entropy_estimate:.6g} (exact {rate.cross_entropy_exact:.6g})")
    print(f"I_F: {rate.i_f:.6g}  I: {rate.mi:.6g}  bound_ok: {rate.bound_ok}")
    ok = pval > GOF_ALPHA and rate.bound_ok
    if not ok:
        print("REGRESSION: goodness of fit or rate bound failed", file=sys.stderr)
    return EXIT_OK if ok else EXIT_REGRESSION


def cmd_encode(args):
    j = _joint(args)
    _check_x(j, args.x)
    seed = _seed(args)
    z = CommonRandomness.for_joint(seed, j)
    bits = encode(args.x, z, j)
    res = rejection_index(args.x, z, j)
    print(f"k: {res.k}  y: {res.y_k}  bits: {bits.bits}")
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(bits.to_bytes())
    return EXIT_OK


def cmd_decode(args):
    j = _joint(args)
    if args.bits is not None:
        bits = Bitstring(args.bits)
    else:
        try:
            with open(args.input, "rb") as fh:
                bits = Bitstring.from_bytes(fh.read())
        except OSError as exc:
            raise InputError(f"{args.input}: {exc.strerror}") from None
    print(f"seed: {args.seed}")
    k, y = decode(bits, CommonRandomness.for_joint(args.seed, j), j)
    print(f"k: {k}  y: {y}")
    return EXIT_OK


def cmd_scaling(args):
    try:
        n_values = [int(v) for v in args.n_list.split(",")]
    except ValueError:
        raise InputError("--n-list must be comma separated integers") from None
    if not args.preset:
        raise InputError("--preset is required")
    j = _joint(args)
    points = redundancy_curve(j, n_values, method=args.method)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_redundancy_csv(points, fh)
    else:
        write_redundancy_csv(points, sys.stdout)
    return EXIT_OK


def cmd_gauss(args):
    p = Gauss1D(args.mean, args.var, args.trunc)
    q = Gauss1D(args.ref_mean, args.ref_var, args.trunc)
    kl, c = gaussian_kl(p, q), gaussian_csd(p, q)
    print(f"kl: {kl:.12g}  csd: {c:.12g}  sandwich upper: {kl + math.log2(kl + 1) + 1:.12g}")
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "figure1.csv"), "w", newline="") as fh:
        write_rows_csv(fh, ("level", "width"), figure1_rows(p, q, args.grid_points))

    seed = _seed(args)
    model = AwgnModel(bound=args.awgn_trunc)
    proposals = [(0.3, 1.5), (-0.4, 1.1)] if args.worked_example else None
    x = -0.5 if args.worked_example else args.x
    rows = awgn_demo(x, seed=seed, proposals=proposals, model=model)
    with open(os.path.join(args.out_dir, "figure2_trace.csv"), "w", newline="") as fh:
        write_rows_csv(fh, ("i", "y", "level", "accept"),
                       [(r.i, r.y, r.level, r.accept) for r in rows])
    print(f"awgn: B={model.bound:g} M={model.bound_m:.6g} x={x:g} accepted at step {rows[-1].i} "
          f"(y={rows[-1].y:.6g})")
    return EXIT_OK


def cmd_verify(args):
    t0 = time.perf_counter()
    failed = None
    for res in run_checks(args.level):
        print(f"{'PASS' if res.ok else 'FAIL'}  {res.name:28s} {res.seconds:7.2f}s  {res.detail}")
        if not res.ok and failed is None:
            failed = res.name
    print(f"wall time: {time.perf_counter() - t0:.1f}s")
    if failed:
        print(f"first failing invariant: {failed}", file=sys.stderr)
        return EXIT_REGRESSION
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="ringtoss", description="Ring toss channel simulation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="information measures of a channel")
    _add_channel(p)
    p.add_argument("--csv", help="also write the report as CSV")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("simulate", help="simulate the channel and measure the code rate")
    _add_channel(p)
    p.add_argument("--x", type=int, default=0, help="channel input (default 0)")
    p.add_argument("--trials", type=int, default=10_000, help="number of channel uses, at least 100")
    p.add_argument("--seed", type=int, help="shared seed; drawn and printed if omitted")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("encode", help="encode one channel use")
    _add_channel(p)
    p.add_argument("--x", type=int, required=True, help="channel input")
    p.add_argument("--seed", type=int, help="shared seed; drawn and printed if omitted")
    p.add_argument("--out", help="write the framed codeword to this file")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a codeword")
    _add_channel(p)
    p.add_argument("--seed", type=int, required=True, help="seed used by the encoder")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input", help="framed codeword file")
    src.add_argument("--bits", help="codeword as a 0/1 string")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("scaling", help="redundancy curve of product channels")
    p.add_argument("--preset", required=True, help="single-letter channel preset")
    p.add_argument("--n-list", default="1,2,4,8,16,64,256,1024,4096,16384",
                   help="comma-separated increasing block lengths")
    p.add_argument("--method", default="auto", choices=["auto", "singular", "bec", "two-level", "generic"],
                   help="evaluation path for I_F of the product channel")
    p.add_argument("--out", help="CSV path (stdout by default)")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("gauss", help="Gaussian width function and AWGN trace as CSV")
    p.add_argument("--mean", type=float, default=0.3, help="mean of the target density")
    p.add_argument("--var", type=float, default=0.25, help="variance of the target density")
    p.add_argument("--ref-mean", type=float, default=0.0, help="mean of the proposal density")
    p.add_argument("--ref-var", type=float, default=1.0, help="variance of the proposal density")
    p.add_argument("--trunc", type=float, default=None, help="truncate both densities to [-B, B]")
    p.add_argument("--grid-points", type=int, default=201, help="levels in figure1.csv")
    p.add_argument("--awgn-trunc", type=float, default=4.0, help="half-width of the AWGN support square")
    p.add_argument("--x", type=float, default=-0.5, help="AWGN input for the trace")
    p.add_argument("--seed", type=int, help="shared seed; drawn and printed if omitted")
    p.add_argument("--worked-example", action="store_true",
                   help="replay the two fixed proposals instead of the seeded stream")
    p.add_argument("--out-dir", default=".", help="directory for the CSV files")
    p.set_defaults(func=cmd_gauss)

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("--level", choices=["quick", "full"], default="quick",
                   help="quick runs in seconds; full adds the Monte Carlo checks")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, MalformedCodeword, TooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGRESSION
    except (RingTossError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
