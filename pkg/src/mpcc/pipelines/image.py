"""Block-based image pipeline with a sensitive region visible only to the superuser.

Each 32x32 block is vectorized row-major, mapped to KLT coefficients,
masked (and, inside the sensitive region, permuted), measured, stored and
decompressed by the cloud. The superuser undoes both layers; the
semi-authorized user removes the mask only, so sensitive blocks come back
with scrambled coefficients.
"""

import csv
import logging
import math
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..blocks import DecompressedBlock
from ..cloudstore import CiphertextRecord, CloudStore
from ..codec import BlockKind, PlainBlock, dec_semi, dec_super, enc_block
from ..errors import BadArgs, BadImage, BasisMissing, NotConverged
from ..keyschedule import DEFAULT_LEVELS, MasterKey, derive_subkeys
from ..recovery import APPROX_SPARSE
from ..sensing import gen_sensing_matrix
from ..transform import klt_train
from .imageio import read_pgm, stretch, write_pgm
from .metrics import capped, mse, psnr_from_mse

logger = logging.getLogger(__name__)

BLOCK = 32
DEFAULT_RATES = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
# (row0, col0, row1, col1), end-exclusive pixel rectangle
DEFAULT_SENSITIVE = ((192, 192, 320, 320),)
SCENE_SEED = 7
TEST_TEXTURE_SEED = 11
TRAIN_TEXTURE_SEED = 12


def synthetic_scene(size=512, seed=SCENE_SEED, texture_seed=TEST_TEXTURE_SEED):
    """Smooth synthetic scene: gradients, blurred ellipses and fine texture.

    ``seed`` fixes the layout; ``texture_seed`` only changes the
    low-amplitude texture, so two texture seeds give two "frames" of the
    same static background.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = 90.0 + 60.0 * xx + 30.0 * np.sin(3.0 * np.pi * yy)
    for _ in range(14):
        cx, cy = rng.uniform(0.0, 1.0, 2)
        a, b = rng.uniform(0.04, 0.2, 2)
        th = rng.uniform(0.0, np.pi)
        u = (xx - cx) * np.cos(th) + (yy - cy) * np.sin(th)
        v = -(xx - cx) * np.sin(th) + (yy - cy) * np.cos(th)
        img[(u / a) ** 2 + (v / b) ** 2 < 1.0] += rng.uniform(-70.0, 70.0)
    img = ndimage.gaussian_filter(img, 2.0)
    trng = np.random.Generator(np.random.PCG64(texture_seed))
    tex = ndimage.gaussian_filter(trng.standard_normal((size, size)), 1.5)
    img += 6.0 * tex / tex.std()
    return np.clip(np.rint(img), 0, 255)


def bundled_image(name="test_scene.pgm"):
    """Load one of the PGM files shipped in ``mpcc/data``."""
    with resources.as_file(resources.files("mpcc") / "data" / name) as path:
        return read_pgm(path)


def image_blocks(image, block=BLOCK, stride=None):
    """Row-major ``block x block`` patches as rows of a 2-D array."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    stride = stride or block
    if h % block or w % block:
        raise BadImage(f"image {h}x{w} not divisible by block size {block}")
    out = [image[r: r + block, c: c + block].reshape(-1)
           for r in range(0, h - block + 1, stride)
           for c in range(0, w - block + 1, stride)]
    return np.array(out)


def assemble(blocks, shape, block=BLOCK):
    h, w = shape
    img = np.zeros(shape)
    per_row = w // block
    for i, vec in enumerate(blocks):
        r, c = divmod(i, per_row)
        img[r * block: (r + 1) * block, c * block: (c + 1) * block] = \
            np.asarray(vec).reshape(block, block)
    return img


def sensitive_blocks(shape, rects, block=BLOCK):
    """Indices of blocks that intersect any of the sensitive rectangles."""
    h, w = shape
    per_row = w // block
    out = set()
    for r0, c0, r1, c1 in rects:
        if not (0 <= r0 < r1 <= h and 0 <= c0 < c1 <= w):
            raise BadArgs(f"sensitive rectangle {(r0, c0, r1, c1)} outside the image")
        for br in range(r0 // block, (r1 - 1) // block + 1):
            for bc in range(c0 // block, (c1 - 1) // block + 1):
                out.add(br * per_row + bc)
    return sorted(out)


def train_klt(image, block=BLOCK, stride=8):
    """KLT from all (overlapping) blocks of a training image."""
    return klt_train(image_blocks(image, block, stride))


@dataclass
class ImageJob:
    pixels: np.ndarray
    basis: object
    sensitive: list
    block: int = BLOCK

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] % self.block or px.shape[1] % self.block:
            raise BadImage(f"image shape {px.shape} not divisible by block {self.block}")
        self.pixels = px
        if self.basis is None:
            raise BasisMissing("image pipeline needs a trained or loaded basis")
        if self.basis.n != self.block * self.block:
            raise BadArgs(f"basis length {self.basis.n} != block size {self.block ** 2}")


@dataclass
class ImageConfig:
    master_key: MasterKey
    rates: tuple = DEFAULT_RATES
    phi_seed: int = 1
    levels: int = DEFAULT_LEVELS
    solver: object = field(default_factory=lambda: APPROX_SPARSE)
    out_dir: Path | None = None


@dataclass
class RateOutcome:
    rate: float
    m: int
    cloud: np.ndarray
    semi: np.ndarray
    superuser: np.ndarray
    semi_sensitive: float
    super_sensitive: float
    semi_complete: float
    super_complete: float
    not_converged: int


@dataclass
class PsnrReport:
    rows: list

    def as_table(self):
        lines = ["rate   semi_sens  super_sens  semi_all  super_all"]
        for r in self.rows:
            lines.append(f"{r.rate:4.2f} {capped(r.semi_sensitive):10.2f} "
                         f"{capped(r.super_sensitive):11.2f} {capped(r.semi_complete):9.2f} "
                         f"{capped(r.super_complete):10.2f}")
        return "\n".join(lines)


def _region_mask(shape, sensitive, block):
    mask = np.zeros(shape, dtype=bool)
    per_row = shape[1] // block
    for i in sensitive:
        r, c = divmod(i, per_row)
        mask[r * block: (r + 1) * block, c * block: (c + 1) * block] = True
    return mask


def run_image_rate(job, config, rate, keys=None):
    """Full encode/store/decompress/decode round for one sampling rate."""
    keys = keys or derive_subkeys(config.master_key)
    n = job.block * job.block
    m = int(round(rate * n))
    if not 1 <= m <= n:
        raise BadArgs(f"rate {rate} gives m={m} outside 1..{n}")
    phi = gen_sensing_matrix(config.phi_seed, m, n)
    blocks = image_blocks(job.pixels, job.block)
    sens = set(job.sensitive)
    records = []
    for i, vec in enumerate(blocks):
        pb = PlainBlock(vec, i, BlockKind.TRANSFORM, sensitive=i in sens)
        cb = enc_block(keys, phi, pb, job.basis, t=config.levels)
        records.append(CiphertextRecord.from_cipher_block(cb, n, config.phi_seed))
    cloud, semi, sup = [], [], []
    failed = 0
    with tempfile.TemporaryDirectory() as tmp:
        log_dir = Path(config.out_dir or tmp)
        log_dir.mkdir(parents=True, exist_ok=True)
        log_path = log_dir / f"image_rate{rate:.2f}.log"
        if log_path.exists():
            log_path.unlink()
        with CloudStore(log_path, m, n, config.phi_seed, options=config.solver) as store:
            store.put_many(records)
            try:
                zs = store.get_decompressed_many(range(len(blocks)), config.solver)
            except NotConverged:
                zs = []
                for i in range(len(blocks)):
                    try:
                        zs.append(store.get_decompressed(i, config.solver))
                    except NotConverged as exc:
                        failed += 1
                        zs.append(DecompressedBlock(exc.result.z, i))
    for i, z in enumerate(zs):
        was = i in sens
        cloud.append(z.z)
        sup.append(dec_super(keys, z, job.basis, was, t=config.levels).values)
        semi.append(dec_semi(keys.k_r, z, job.basis, was, t=config.levels).values)
    shape = job.pixels.shape
    semi_img = np.clip(assemble(semi, shape, job.block), 0, 255)
    sup_img = np.clip(assemble(sup, shape, job.block), 0, 255)
    cloud_img = stretch(assemble(cloud, shape, job.block))
    region = _region_mask(shape, job.sensitive, job.block)

    def region_psnr(img):
        if not region.any():
            return math.nan
        return psnr_from_mse(mse(job.pixels[region], img[region]))

    return RateOutcome(
        rate=rate, m=m, cloud=cloud_img, semi=semi_img, superuser=sup_img,
        semi_sensitive=region_psnr(semi_img),
        super_sensitive=region_psnr(sup_img),
        semi_complete=psnr_from_mse(mse(job.pixels, semi_img)),
        super_complete=psnr_from_mse(mse(job.pixels, sup_img)),
        not_converged=failed,
    )


def run_image(job, config):
    """Run every configured rate; returns ``(outcomes, PsnrReport)``."""
    rates = sorted(config.rates)
    if any(b <= a for a, b in zip(rates, rates[1:])):
        raise BadArgs("sampling rates must be distinct")
    keys = derive_subkeys(config.master_key)
    outcomes = []
    for rate in rates:
        out = run_image_rate(job, config, rate, keys)
        logger.info("rate=%.2f m=%d super=%.2f dB semi=%.2f dB not_converged=%d",
                    rate, out.m, out.super_complete, out.semi_complete, out.not_converged)
        outcomes.append(out)
    report = PsnrReport(outcomes)
    if config.out_dir is not None:
        write_image_artifacts(outcomes, report, Path(config.out_dir))
    return outcomes, report


def write_image_artifacts(outcomes, report, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "psnr.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rate", "m", "semi_sensitive_db", "super_sensitive_db",
                    "semi_complete_db", "super_complete_db", "not_converged"])
        for o in outcomes:
            w.writerow([f"{o.rate:.2f}", o.m, f"{capped(o.semi_sensitive):.2f}",
                        f"{capped(o.super_sensitive):.2f}", f"{capped(o.semi_complete):.2f}",
                        f"{capped(o.super_complete):.2f}", o.not_converged])
    for o in outcomes:
        tag = f"{o.rate:.2f}"
        write_pgm(out_dir / f"cloud_{tag}.pgm", o.cloud)
        write_pgm(out_dir / f"semi_{tag}.pgm", o.semi)
        write_pgm(out_dir / f"super_{tag}.pgm", o.superuser)
