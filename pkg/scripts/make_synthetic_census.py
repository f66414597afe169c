#!/usr/bin/env python3
"""Regenerate data/synthetic_census.csv (1000 rows, fixed seed).

Census-like numeric features with a binary sensitive attribute and a binary
income target whose positive rate rises with education, age, capital gain,
and hours, and differs between sensitive groups so the baseline disparate
impact is away from 1.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

SEED = 20240801
N = 1000
OUT = Path(__file__).resolve().parent.parent / "data" / "synthetic_census.csv"


def main() -> None:
    rng = np.random.default_rng(SEED)
    age = np.clip(np.round(rng.normal(38, 12, N)), 18, 80)
    education_num = np.clip(np.round(rng.normal(10, 2.5, N)), 1, 16)
    capital_gain = np.where(
        rng.random(N) < 0.25, np.round(rng.exponential(3000, N)), 0.0
    )
    hours_per_week = np.clip(np.round(rng.normal(41, 10, N)), 5, 80)
    gender = (rng.random(N) < 0.67).astype(float)  # 0 = protected group (33%)

    z = (
        0.04 * (age - 38)
        + 0.45 * (education_num - 10)
        + 0.00025 * capital_gain
        + 0.03 * (hours_per_week - 41)
        + 0.9 * gender
        - 1.1
    )
    p = 1.0 / (1.0 + np.exp(-z))
    income = (rng.random(N) < p).astype(float)

    OUT.parent.mkdir(parents=True, exist_ok=True)
    with OUT.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["age", "education_num", "capital_gain", "hours_per_week", "gender", "income"]
        )
        for row in zip(age, education_num, capital_gain, hours_per_week, gender, income):
            writer.writerow([repr(float(v)) for v in row])
    print(f"wrote {OUT} ({N} rows, positive rate {income.mean():.3f})")


if __name__ == "__main__":
    main()
