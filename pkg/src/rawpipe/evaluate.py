"""Dataset evaluation: mosaic, optional noise, reconstruct, quantize, score."""

from __future__ import annotations

import enum
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import classical
from .cfa import BayerPattern, NoiseSpec, add_noise, mosaic
from .data import DatasetError, ingest_dataset_report
from .metrics import EvalProtocol, EvalReport, EvalRow, score
from .pipeline import demosaic_cnn, full_pipeline, joint_cnn

log = logging.getLogger(__name__)


class EvalMethod(enum.Enum):
    BILINEAR = "bilinear"
    HA = "ha"
    GBTF = "gbtf"
    IDENTITY = "identity"  # the clean image itself; sanity sentinel
    CNN = "cnn"  # Stage 1 only
    PIPELINE = "pipeline"  # Stage 1 then Stage 2
    JOINT = "joint"

    @classmethod
    def parse(cls, v) -> "EvalMethod":
        if isinstance(v, cls):
            return v
        return cls(str(v).lower())


def default_jobs() -> int:
    env = os.environ.get("RAWPIPE_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def noise_seed(seed: int, index: int) -> int:
    """Per-image noise seed; a function of the run seed and sorted position."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def make_reconstructor(method, dm=None, dn=None, joint=None, sigma: float = 0.0):
    method = EvalMethod.parse(method)
    if method in (EvalMethod.BILINEAR, EvalMethod.HA, EvalMethod.GBTF):
        algo = classical.DemosaicMethod.parse(method.value)
        return lambda x, y: classical.demosaic(y, algo)
    if method is EvalMethod.IDENTITY:
        return lambda x, y: x
    if method is EvalMethod.CNN:
        if dm is None:
            raise ValueError("method cnn needs a demosaic stage")
        return lambda x, y: demosaic_cnn(y, dm)
    if method is EvalMethod.PIPELINE:
        if dm is None or dn is None:
            raise ValueError("method pipeline needs demosaic and denoise stages")
        return lambda x, y: full_pipeline(y, dm, dn, sigma)
    if joint is None:
        raise ValueError("method joint needs a joint stage")
    return lambda x, y: joint_cnn(y, joint)


def evaluate_images(images, method, protocol: EvalProtocol = EvalProtocol(), pattern="RGGB",
                    sigma: float = 0.0, seed: int = 0, jobs: int = 1, title: str = "",
                    dm=None, dn=None, joint=None) -> EvalReport:
    """Score ``[(name, image)]``; rows keep the input order whatever ``jobs`` is."""
    pattern = BayerPattern.parse(pattern)
    recon = make_reconstructor(method, dm, dn, joint, sigma)

    def one(item):
        k, (name, x) = item
        y = mosaic(x, pattern)
        if sigma > 0:
            y = add_noise(y, NoiseSpec(sigma, noise_seed(seed, k)))
        p, s = score(x, recon(x, y), protocol)
        return EvalRow(name, p, s)

    items = list(enumerate(images))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            rows = list(pool.map(one, items))
    else:
        rows = [one(it) for it in items]
    return EvalReport(rows, title, protocol)


def evaluate_dataset(method, directory, protocol: EvalProtocol = EvalProtocol(), pattern="RGGB",
                     sigma: float = 0.0, seed: int = 0, jobs: int = 1,
                     dm=None, dn=None, joint=None) -> EvalReport:
    """Evaluate every usable image of ``directory``; unreadable files land in ``errors``."""
    images, skipped = ingest_dataset_report(directory)
    method = EvalMethod.parse(method)
    title = (f"{method.value} on {Path(directory).name} ({len(images)} images, "
             f"pattern={BayerPattern.parse(pattern).value}, sigma={sigma:g})")
    report = evaluate_images(images, method, protocol, pattern, sigma, seed, jobs, title,
                             dm, dn, joint)
    report.errors = list(skipped)
    return report


__all__ = ["EvalMethod", "evaluate_dataset", "evaluate_images", "default_jobs", "noise_seed",
           "make_reconstructor", "DatasetError"]
