#!/usr/bin/env python3
"""Writes the bundled synthetic fixture: a 3-city price panel, a conflict
catalog, city coordinates and a pipeline configuration.

Returns follow a VAR(1) whose cross-city coefficients rise during the
configured conflict spans, so the rolling spillover index responds to them.

    python3 tools/make_synthetic_fixture.py data/synthetic
"""

import argparse
import pathlib

import numpy as np

CITIES = ["Amsterdam", "Paris", "Rome"]
COORDS = {"Amsterdam": (52.37, 4.90), "Paris": (48.86, 2.35), "Rome": (41.90, 12.50)}
FIRST, LAST = 1550, 1800
WARS = [(1618, 1648), (1688, 1697), (1700, 1721), (1701, 1714), (1756, 1762)]


def panel(rng):
    years = np.arange(FIRST, LAST + 1)
    n = len(CITIES)
    calm = np.diag([0.3, 0.2, 0.25])
    tense = calm + 0.3 * (np.ones((n, n)) - np.eye(n))
    chol = np.array([[1.0, 0.0, 0.0], [0.3, 1.0, 0.0], [0.2, 0.2, 1.0]])
    y = np.zeros(n)
    for _ in range(200):
        y = calm @ y + chol @ rng.standard_normal(n)
    returns = []
    for year in years:
        at_war = any(a <= year <= b for a, b in WARS)
        y = (tense if at_war else calm) @ y + chol @ rng.standard_normal(n)
        returns.append(y.copy())
    levels = 100.0 + np.cumsum(np.array(returns), axis=0)
    # a few recording errors for the winsorizer
    for row, col, factor in [(12, 0, 1.6), (140, 1, 0.5), (201, 2, 1.7)]:
        levels[row, col] *= factor
    return years, levels


def catalog(rng):
    rows = []
    eid = 1
    for a, b in WARS:
        rows.append((eid, f"War {a}-{b}", 3, a, b, int(rng.integers(20000, 400000))))
        eid += 1
    for _ in range(60):
        start = int(rng.integers(FIRST, LAST - 5))
        end = start + int(rng.integers(0, 6))
        region = int(rng.choice([3, 4, 7]))
        rows.append((eid, f"Skirmish {eid}", region, start, end, int(rng.integers(100, 20000))))
        eid += 1
    rows.append((eid, "Unrecorded losses", 3, 1660, 1661, None))
    rows.append((eid + 1, "Open-ended", 4, 1790, None, 500))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)

    years, levels = panel(rng)
    with open(out / "prices.csv", "w", newline="\n") as f:
        f.write("year," + ",".join(CITIES) + "\n")
        for year, row in zip(years, levels):
            f.write(f"{year}," + ",".join(f"{v:.3f}" for v in row) + "\n")

    with open(out / "conflicts.csv", "w", newline="\n") as f:
        f.write("id,name,region,start_year,end_year,fatalities\n")
        for eid, name, region, start, end, deaths in catalog(rng):
            f.write(f"{eid},{name},{region},{start},{'' if end is None else end},"
                    f"{'' if deaths is None else deaths}\n")

    with open(out / "coords.csv", "w", newline="\n") as f:
        f.write("label,lat,lon\n")
        for city in CITIES:
            lat, lon = COORDS[city]
            f.write(f"{city},{lat},{lon}\n")

    (out / "pipeline.cfg").write_text(
        "# synthetic 3-city run; see tools/make_synthetic_fixture.py\n"
        "panel = prices.csv\n"
        "catalog = conflicts.csv\n"
        "coords = coords.csv\n"
        "winsorize = 0.01\n"
        "order = 1\n"
        "horizon = 10\n"
        "windows = 30-40\n"
        "exclusions = 1628-1648\n"
        "regions = 3, 4\n"
        "quantiles = 0.25, 0.5, 0.75, 0.9\n"
        "bootstrap = 200\n"
        "sea.n_boot = 1000\n"
        "network.retain = 5\n"
        "network.highlight = 10\n"
        "seed = 42\n"
        "output = run\n"
    )


if __name__ == "__main__":
    main()
