"""Command-line entry point: ``mpcc <subcommand> ...``.

Vectors on disk (plaintext blocks, decompressed blocks, statistics input)
are CSV text, one block per line. Every subcommand accepts
``--config FILE`` with ``key = value`` lines; explicit flags win.
"""

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import securitybench
from .blocks import DecompressedBlock
from .errors import BadArgs, MPCCError
from .keyschedule import DEFAULT_LEVELS, KEY_ENV_VAR, MasterKey, derive_subkeys
from .pipelines.config import read_config
from .recovery import APPROX_SPARSE, SolverOptions

logger = logging.getLogger("mpcc")


def read_vectors(path):
    rows = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            if line and any(c.strip() for c in line):
                rows.append([float(c) for c in line if c.strip()])
    return [np.array(r) for r in rows]


def write_vectors(path, vectors):
    out = sys.stdout if str(path) == "-" else open(path, "w", newline="")
    try:
        w = csv.writer(out, lineterminator="\n")
        for v in vectors:
            w.writerow([repr(float(x)) for x in v])
    finally:
        if out is not sys.stdout:
            out.close()


def _load_key(args):
    if getattr(args, "key", None):
        return MasterKey.load(args.key)
    if os.environ.get(KEY_ENV_VAR):
        return MasterKey.from_env()
    raise BadArgs(f"no master key: pass --key FILE or set {KEY_ENV_VAR}")


def _solver(args, base=None):
    if base is None:
        base = APPROX_SPARSE if getattr(args, "approx", False) else SolverOptions()
    if getattr(args, "max_iters", None):
        return replace(base, max_iters=args.max_iters)
    return base


def _basis(args):
    if getattr(args, "basis", None):
        from .transform import load_basis
        return load_basis(args.basis)
    return None


def _sensitive_set(text):
    if not text:
        return set()
    out = set()
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            out.update(range(int(a), int(b) + 1))
        elif part:
            out.add(int(part))
    return out


# -- subcommands ---------------------------------------------------------------

def cmd_keygen(args):
    key = MasterKey.generate()
    if args.out == "-":
        print(key.to_hex())
    else:
        key.save(args.out)
        print(f"wrote {args.out}")


def cmd_encode(args):
    from .cloudstore import CiphertextRecord, CloudStore
    from .codec import BlockKind, PlainBlock, enc_block
    from .sensing import gen_sensing_matrix

    keys = derive_subkeys(_load_key(args))
    vectors = read_vectors(args.input)
    if not vectors:
        raise BadArgs(f"{args.input} holds no vectors")
    n = args.n or vectors[0].shape[0]
    phi = gen_sensing_matrix(args.phi_seed, args.m, n)
    basis = _basis(args)
    sensitive = _sensitive_set(args.sensitive)
    kind = BlockKind.TRANSFORM if basis is not None else BlockKind.CANONICAL
    records = []
    for k, vec in enumerate(vectors):
        idx = args.start_index + k
        block = PlainBlock(vec, idx, kind, sensitive=idx in sensitive)
        cb = enc_block(keys, phi, block, basis, t=args.levels)
        records.append(CiphertextRecord.from_cipher_block(cb, n, args.phi_seed))
    with CloudStore(args.log, args.m, n, args.phi_seed) as store:
        store.put_many(records)
    print(f"stored {len(records)} blocks in {args.log}")


def cmd_serve(args):
    from .cloudstore import CloudStore, serve

    with CloudStore(args.log, options=_solver(args)) as store:
        serve(store, args.listen)


def cmd_query(args):
    from .cloudstore import CloudClient

    with CloudClient(args.connect) as client:
        if args.count:
            print(client.stat_count())
            return
        vectors = []
        for idx in args.index:
            reply = client.fetch_raw(idx) if args.raw else client.fetch_decompressed(idx)
            vectors.append(reply.payload)
    write_vectors(args.out, vectors)


def _decode(args, superuser):
    from .codec import dec_semi, dec_super

    keys = derive_subkeys(_load_key(args))
    basis = _basis(args)
    sensitive = _sensitive_set(args.sensitive)
    vectors = read_vectors(args.input)
    indices = args.index or list(range(args.start_index, args.start_index + len(vectors)))
    if len(indices) != len(vectors):
        raise BadArgs("number of --index values must match the input vectors")
    out = []
    for idx, vec in zip(indices, vectors):
        z = DecompressedBlock(vec, idx)
        was = idx in sensitive
        if superuser:
            out.append(dec_super(keys, z, basis, was, t=args.levels).values)
        else:
            out.append(dec_semi(keys.k_r, z, basis, was, t=args.levels).values)
    write_vectors(args.out, out)


def cmd_decode_super(args):
    _decode(args, True)


def cmd_decode_semi(args):
    _decode(args, False)


def cmd_stats(args):
    from .codec import permuted_stats

    print("block,mean,variance,histogram")
    for k, vec in enumerate(read_vectors(args.input)):
        st = permuted_stats(vec, bins=args.bins)
        hist = " ".join(str(int(c)) for c in st.counts)
        print(f"{k},{st.mean!r},{st.variance!r},{hist}")


def cmd_run_smartmeter(args):
    from .pipelines.meter import (SmartMeterConfig, ingest_meter_csv, run_smartmeter,
                                  synthetic_meter_frames)

    if args.csv:
        frames = ingest_meter_csv(args.csv, n=args.n)
    elif args.synthetic:
        frames = synthetic_meter_frames(args.synthetic, n=args.n, seed=args.seed)
    else:
        raise BadArgs("give --csv PATH or --synthetic COUNT")
    cfg = SmartMeterConfig(
        master_key=_load_key(args) if (args.key or os.environ.get(KEY_ENV_VAR))
        else MasterKey(bytes(32)),
        frames=frames, m=args.m, n=args.n, phi_seed=args.phi_seed, levels=args.levels,
        bins=args.bins, solver=_solver(args), out_dir=Path(args.out), plots=args.plots)
    result = run_smartmeter(cfg)
    ok = [o for o in result.outcomes if o.converged]
    exact = sum(o.relative_error < 1e-3 for o in ok)
    print(f"frames={len(result.outcomes)} not_converged={result.not_converged} "
          f"exact(<1e-3)={exact}")
    print(f"artifacts in {args.out}")


def cmd_run_image(args):
    from .pipelines.image import (DEFAULT_SENSITIVE, ImageConfig, ImageJob, bundled_image,
                                  run_image, sensitive_blocks, train_klt)
    from .pipelines.imageio import read_pgm
    from .transform import load_basis, save_basis

    pixels = read_pgm(args.image) if args.image else bundled_image()
    if args.basis:
        basis = load_basis(args.basis)
    elif args.train:
        basis = train_klt(read_pgm(args.train), args.blocksize)
    elif args.image:
        basis = train_klt(pixels, args.blocksize)
    else:
        basis = train_klt(bundled_image("train_scene.pgm"), args.blocksize)
    rects = DEFAULT_SENSITIVE
    if args.sensitive_rect:
        rects = [tuple(int(v) for v in r.split(",")) for r in args.sensitive_rect]
    job = ImageJob(pixels, basis, sensitive_blocks(pixels.shape, rects, args.blocksize),
                   args.blocksize)
    rates = tuple(float(r) for r in args.rate.split(","))
    cfg = ImageConfig(
        master_key=_load_key(args) if (args.key or os.environ.get(KEY_ENV_VAR))
        else MasterKey(bytes(32)),
        rates=rates, phi_seed=args.phi_seed, levels=args.levels,
        solver=_solver(args, APPROX_SPARSE),
        out_dir=Path(args.out))
    Path(args.out).mkdir(parents=True, exist_ok=True)
    if not args.basis:
        save_basis(basis, Path(args.out) / "klt.basis")
    _, report = run_image(job, cfg)
    print(report.as_table())
    print(f"artifacts in {args.out}")


def cmd_psnr(args):
    from .pipelines.imageio import read_pgm
    from .pipelines.metrics import capped, psnr

    value = psnr(read_pgm(args.original), read_pgm(args.reconstructed))
    print(f"{capped(value):.4f}")


def cmd_bench_security(args):
    from .securitybench import brute_force_counts, format_table, verify_perfect_secrecy

    print(f"F_{args.p} ciphertext table (c = r*m mod {args.p}):")
    print(format_table(args.p))
    print()
    print("prime,perfect_secrecy")
    for p in [q for q in range(2, args.max_prime + 1) if securitybench.is_prime(q)]:
        print(f"{p},{verify_perfect_secrecy(p).perfect}")
    print()
    print("n,k,t,index_count,lower_bound,cloud_count_log2")
    for n, k in [(4, 2), (64, 8), (256, 30), (512, 70)]:
        c = brute_force_counts(n, k, args.levels)
        print(f"{n},{k},{c.t},{c.index_count},{c.lower_bound},{c.cloud_count_log2:.2f}")


# -- parser ----------------------------------------------------------------------

def _common(p, key=True):
    p.add_argument("--config", help="key = value file; flags override it")
    if key:
        p.add_argument("--key", help=f"master key file (or set {KEY_ENV_VAR})")
    p.add_argument("--levels", type=int, default=DEFAULT_LEVELS,
                   help="mask magnitude levels T (entries in ±1..±T)")


def build_parser():
    parser = argparse.ArgumentParser(prog="mpcc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="create a master key file")
    p.add_argument("--out", default="-", help="key file path (default: print)")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encode", help="encrypt CSV vectors into a ciphertext log")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--phi-seed", type=int, default=1)
    p.add_argument("--start-index", type=int, default=0)
    p.add_argument("--basis", help="basis file; enables transform mode")
    p.add_argument("--sensitive", help="sensitive block indices, e.g. 0,3,5-9")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("serve", help="run the cloud query service")
    p.add_argument("--config")
    p.add_argument("--log", required=True)
    p.add_argument("--listen", default="127.0.0.1:7070")
    p.add_argument("--approx", action="store_true",
                   help="solve with epsilon = 1e-6 ||y|| (compressible data)")
    p.add_argument("--max-iters", type=int)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("query", help="fetch blocks from a running cloud")
    p.add_argument("--config")
    p.add_argument("--connect", default="127.0.0.1:7070")
    p.add_argument("--index", type=int, nargs="*", default=[])
    p.add_argument("--raw", action="store_true", help="fetch measurements, not z")
    p.add_argument("--count", action="store_true", help="print number of stored blocks")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_query)

    for name, func in (("decode-super", cmd_decode_super), ("decode-semi", cmd_decode_semi)):
        p = sub.add_parser(name, help=f"{name.split('-')[1]}-user decryption of z vectors")
        _common(p)
        p.add_argument("--input", required=True)
        p.add_argument("--out", default="-")
        p.add_argument("--index", type=int, nargs="*")
        p.add_argument("--start-index", type=int, default=0)
        p.add_argument("--basis")
        p.add_argument("--sensitive")
        p.set_defaults(func=func)

    p = sub.add_parser("stats", help="mean, variance, histogram per vector")
    p.add_argument("--config")
    p.add_argument("--input", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("run-smartmeter", help="smart-meter experiment")
    _common(p)
    p.add_argument("--csv")
    p.add_argument("--synthetic", type=int, metavar="COUNT")
    p.add_argument("--seed", type=int, default=20200715, help="synthetic generator seed")
    p.add_argument("--m", type=int, default=256)
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--phi-seed", type=int, default=1)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--plots", action="store_true")
    p.add_argument("--out", default="smartmeter-out")
    p.set_defaults(func=cmd_run_smartmeter)

    p = sub.add_parser("run-image", help="image experiment with a sensitive region")
    _common(p)
    p.add_argument("--image", help="512x512 PGM (default: bundled scene)")
    p.add_argument("--train", help="PGM to train the KLT on")
    p.add_argument("--basis", help="pre-trained basis file")
    p.add_argument("--rate", default="0.2,0.3,0.4,0.5,0.6,0.7")
    p.add_argument("--blocksize", type=int, default=32)
    p.add_argument("--sensitive-rect", action="append", metavar="R0,C0,R1,C1")
    p.add_argument("--phi-seed", type=int, default=1)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--out", default="image-out")
    p.set_defaults(func=cmd_run_image)

    p = sub.add_parser("psnr", help="PSNR between two PGM images")
    p.add_argument("original")
    p.add_argument("reconstructed")
    p.set_defaults(func=cmd_psnr)

    p = sub.add_parser("bench-security", help="finite-field secrecy and brute-force counts")
    p.add_argument("--config")
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--max-prime", type=int, default=31)
    p.add_argument("--levels", type=int, default=DEFAULT_LEVELS)
    p.set_defaults(func=cmd_bench_security)
    return parser


def _apply_config(parser, argv):
    """Parse ``argv`` with config-file values installed as defaults.

    Explicit flags still win, and settings given in the file no longer
    count as missing required options.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in subparsers), None)
    if not known.config or command is None:
        return parser.parse_args(argv)
    sub = subparsers[command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in read_config(known.config).items():
        action = actions.get(key)
        if action is None:
            raise BadArgs(f"{known.config}: unknown setting {key!r} for {command}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        elif action.nargs in ("*", "+"):
            defaults[key] = [(action.type or str)(v) for v in value.replace(",", " ").split()]
        elif action.nargs == "append" or isinstance(action, argparse._AppendAction):
            defaults[key] = [value]
        else:
            defaults[key] = (action.type or str)(value)
        action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    args = _apply_config(parser, argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except MPCCError as exc:
        print(f"mpcc: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
