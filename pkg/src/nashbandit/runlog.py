"""Per-round run records and their CSV schema.

Schema (one row per round, UTF-8, LF line endings, header present):
``run_id, algo, t, arm_index, true_mean, reward, phase``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = ("run_id", "algo", "t", "arm_index", "true_mean", "reward", "phase")

TAG_SAMPLE_U = "SAMPLE-U"
TAG_DG_OPT = "D/G-OPT"


def phase_tag(ell: int) -> str:
    return f"PHASE({ell})"


@dataclass
class RunLog:
    """One algorithm run: header fields plus aligned per-round arrays."""

    run_id: str
    algo: str
    seed_lineage: str
    instance_digest: str
    optimal_mean: float
    arm_index: np.ndarray
    true_mean: np.ndarray
    reward: np.ndarray
    phase: list[str]
    surviving: tuple[int, ...] | None = None

    def __post_init__(self):
        self.arm_index = np.asarray(self.arm_index, dtype=int)
        self.true_mean = np.asarray(self.true_mean, dtype=float)
        self.reward = np.asarray(self.reward, dtype=float)
        n = len(self.arm_index)
        if not (len(self.true_mean) == len(self.reward) == len(self.phase) == n):
            raise ValueError("per-round arrays must share one length")
        if n and self.true_mean.min() < -1e-9:
            raise ValueError("true means must be nonnegative")

    def __len__(self) -> int:
        return len(self.arm_index)


def write_csv(log: RunLog, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write(log, fh)


def to_csv_bytes(log: RunLog) -> bytes:
    buf = io.StringIO()
    _write(log, buf)
    return buf.getvalue().encode("utf-8")


def _write(log: RunLog, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for t in range(len(log)):
        writer.writerow([
            log.run_id,
            log.algo,
            t + 1,
            int(log.arm_index[t]),
            repr(float(log.true_mean[t])),
            repr(float(log.reward[t])),
            log.phase[t],
        ])


def read_csv(path, optimal_mean: float, instance_digest: str = "", seed_lineage: str = "") -> RunLog:
    """Rebuild a run log from its CSV.

    The optimum is not recoverable from the rows (the best arm may never
    have been pulled), so the caller supplies it from the instance file.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header!r}")
        rows = list(reader)
    if not rows:
        raise ValueError("empty run log")
    return RunLog(
        run_id=rows[0][0],
        algo=rows[0][1],
        seed_lineage=seed_lineage,
        instance_digest=instance_digest,
        optimal_mean=optimal_mean,
        arm_index=np.array([int(r[3]) for r in rows]),
        true_mean=np.array([float(r[4]) for r in rows]),
        reward=np.array([float(r[5]) for r in rows]),
        phase=[r[6] for r in rows],
    )
