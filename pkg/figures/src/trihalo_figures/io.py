"""Readers for the harness CSV contracts.

Column sets are fixed by the producing tool:
  convergence: scheme,role,p,k,h,err_max,err_l2,plateau
  bench:       scheme,role,p,k,u,reps,mean_ns,total_ns,phase
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

CONVERGENCE_COLUMNS = ("scheme", "role", "p", "k", "h", "err_max", "err_l2", "plateau")
BENCH_COLUMNS = ("scheme", "role", "p", "k", "u", "reps", "mean_ns", "total_ns", "phase")


class FigureInputError(Exception):
    """The input CSV is missing, empty, or does not match the contract."""


@dataclass(frozen=True)
class ConvergenceRow:
    scheme: str
    role: str
    p: int
    k: int
    h: float
    err_max: float
    err_l2: float
    plateau: bool


@dataclass(frozen=True)
class BenchRow:
    scheme: str
    role: str
    p: int
    k: int
    u: int
    reps: int
    mean_ns: float
    total_ns: int
    phase: str


def _read_rows(path, expected_columns):
    path = Path(path)
    if not path.exists():
        raise FigureInputError(f"input CSV not found: {path}")
    with path.open(newline="", encoding="utf-8") as fp:
        reader = csv.DictReader(fp)
        if reader.fieldnames is None:
            raise FigureInputError(f"{path}: empty file, no header row")
        missing = [c for c in expected_columns if c not in reader.fieldnames]
        if missing:
            raise FigureInputError(f"{path}: missing column '{missing[0]}'")
        rows = list(reader)
    if not rows:
        raise FigureInputError(f"{path}: no data rows")
    return rows


def read_convergence(path) -> list[ConvergenceRow]:
    out = []
    for raw in _read_rows(path, CONVERGENCE_COLUMNS):
        out.append(
            ConvergenceRow(
                scheme=raw["scheme"],
                role=raw["role"],
                p=int(raw["p"]),
                k=int(raw["k"]),
                h=float(raw["h"]),
                err_max=float(raw["err_max"]),
                err_l2=float(raw["err_l2"]),
                plateau=raw["plateau"].strip().lower() == "true",
            )
        )
    return out


def read_bench(path) -> list[BenchRow]:
    out = []
    for raw in _read_rows(path, BENCH_COLUMNS):
        out.append(
            BenchRow(
                scheme=raw["scheme"],
                role=raw["role"],
                p=int(raw["p"]),
                k=int(raw["k"]),
                u=int(raw["u"]),
                reps=int(raw["reps"]),
                mean_ns=float(raw["mean_ns"]),
                total_ns=int(float(raw["total_ns"])),
                phase=raw["phase"].strip(),
            )
        )
    return out
