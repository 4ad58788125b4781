"""Rate-distortion report rows and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

CSV_COLUMNS = [
    "scenario",
    "bpp",
    "psnr_db",
    "ms_ssim",
    "alpha",
    "lambda1",
    "lambda2",
    "wall_time_s",
]


@dataclass
class RdReport:
    """One measured operating point (central, side1 or side2)."""

    scenario: str
    bpp: float
    psnr_db: float
    ms_ssim: float
    alpha: float
    lambda1: float
    lambda2: float
    wall_time_s: float

    def __post_init__(self):
        if self.scenario not in ("central", "side1", "side2"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if not 0.0 <= self.ms_ssim <= 1.0:
            raise ValueError("ms_ssim must lie in [0, 1]")


def format_report(r: RdReport) -> str:
    return (
        f"{r.scenario:>7}: {r.bpp:.4f} bpp  {r.psnr_db:.2f} dB  "
        f"ms-ssim {r.ms_ssim:.4f}"
    )


def write_csv(path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))


def read_csv(path) -> list:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                RdReport(
                    scenario=row["scenario"],
                    bpp=float(row["bpp"]),
                    psnr_db=float(row["psnr_db"]),
                    ms_ssim=float(row["ms_ssim"]),
                    alpha=float(row["alpha"]),
                    lambda1=float(row["lambda1"]),
                    lambda2=float(row["lambda2"]),
                    wall_time_s=float(row["wall_time_s"]),
                )
            )
    return out
