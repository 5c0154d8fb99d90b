#!/usr/bin/env python3
"""Generate the synthetic day-ahead auction fixture.

Writes gme_bids.csv, gme_transit.csv and gme_manifest.json next to this file.

Zones, demand lines, producer counts and per-direction transit limits follow
the Italian zonal market of 24 Oct 2024, 20:00 (ten zones, Malta without
producers). Individual bids are synthetic. Producer costs are calibrated so
that a known profile is an equilibrium of the estimated game:

* target prices 127 (SVIZ, NORD), 155 (MONT, SUD, CNOR, CSUD, SARD),
  196.6 (CALA) and 197.4 (SICI, MALT);
* NORD->CNOR, SUD->CALA and CALA->SICI at capacity, every other flow
  strictly inside its bounds.

Only the standard library is used; the output is fully determined by SEED.
"""

import csv
import json
import random
from pathlib import Path

SEED = 20241024
OUT = Path(__file__).resolve().parent
GAMMA_SCALING = 0.99

# zone: (alpha, beta, producers, target price)
ZONES = {
    "SVIZ": (177.34, 0.14, 42, 127.0),
    "MALT": (619.49, 2.63, 0, 197.4),
    "MONT": (3933.86, 9.22, 22, 155.0),
    "SUD": (5019.16, 1.92, 282, 155.0),
    "SICI": (5094.16, 2.03, 138, 197.4),
    "NORD": (4940.46, 0.20, 436, 127.0),
    "CALA": (5079.5, 5.97, 80, 196.6),
    "CNOR": (4747.99, 1.32, 131, 155.0),
    "CSUD": (4818.71, 0.63, 234, 155.0),
    "SARD": (4918.54, 4.16, 79, 155.0),
}

# (from, to, capacity), both directions of every corridor
LIMITS = [
    ("SVIZ", "NORD", 10000), ("NORD", "SVIZ", 10000),
    ("NORD", "CNOR", 4118), ("CNOR", "NORD", 3626),
    ("CNOR", "CSUD", 3001), ("CSUD", "CNOR", 3074),
    ("CSUD", "SARD", 720), ("SARD", "CSUD", 900),
    ("MONT", "CSUD", 10000), ("CSUD", "MONT", 10000),
    ("SUD", "CSUD", 5447), ("CSUD", "SUD", 3161),
    ("SUD", "CALA", 100), ("CALA", "SUD", 600),
    ("SICI", "CALA", 100), ("CALA", "SICI", 250),
    ("MALT", "SICI", 225), ("SICI", "MALT", 225),
]

# designed equilibrium flows; MALT's import is filled in once its demand is fitted
FLOWS = {
    ("SVIZ", "NORD"): 200.0,
    ("NORD", "CNOR"): 4118.0,
    ("CNOR", "CSUD"): 1500.0,
    ("CSUD", "SARD"): 300.0,
    ("CSUD", "MONT"): 300.0,
    ("CSUD", "SUD"): 500.0,
    ("SUD", "CALA"): 100.0,
    ("CALA", "SICI"): 250.0,
}

DEMAND_BIDS = 60
HEADER = [
    "PURPOSE_CD", "STATUS_CD", "MARKET_CD", "UNIT_REFERENCE_NO", "INTERVAL_NO",
    "BID_OFFER_DATE_DT", "ZONE_CD", "QUANTITY_NO", "AWARDED_QUANTITY_NO",
    "ENERGY_PRICE_NO", "AWARDED_PRICE_NO",
]


def r2(v):
    return round(v, 2)


def r3(v):
    return round(v, 3)


def ols(points):
    n = len(points)
    mq = sum(q for q, _ in points) / n
    mp = sum(p for _, p in points) / n
    sqq = sum((q - mq) ** 2 for q, _ in points)
    sqp = sum((q - mq) * (p - mp) for q, p in points)
    slope = sqp / sqq
    return mp - slope * mq, -slope


def demand_rows(rng, zone, alpha, beta, price):
    q_max = 0.95 * alpha / beta
    rows = []
    cumulative = 0.0
    for k in range(DEMAND_BIDS):
        q = r3(q_max / DEMAND_BIDS * rng.uniform(0.6, 1.4))
        cumulative += q
        p = max(r2(alpha - beta * cumulative + rng.gauss(0.0, 0.004 * alpha)), 0.01)
        awarded = q if p >= price else 0.0
        rows.append(["BID", "ACC" if awarded else "REJ", "MGP", f"C_{zone}_{k:03d}",
                     20, 20241024, zone, q, awarded, p, r2(price) if awarded else 0.0])
    rng.shuffle(rows)
    points = []
    cumulative = 0.0
    for row in sorted(rows, key=lambda r: -r[9]):
        cumulative += row[7]
        points.append((cumulative, row[9]))
    return rows, ols(points)


def supply(units, beta, price, scale):
    total = 0.0
    for gamma, p_hat, q0 in units:
        theta = (p_hat - gamma) / (2.0 * q0 * scale)
        total += (price - gamma) / (beta + 2.0 * theta)
    return total


def calibrate(units, beta, price, target):
    lo, hi = 1e-9, 1.0
    while supply(units, beta, price, hi) < target:
        hi *= 2.0
        if hi > 1e12:
            raise SystemExit(f"cannot reach supply {target}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if supply(units, beta, price, mid) < target:
            lo = mid
        else:
            hi = mid
    return hi


def offer_rows(rng, zone, n, beta, price, target):
    cleared = r2(price * 1.1)  # awarded zonal price observed in the auction
    drafts = []
    for k in range(n):
        min_price = r2(price * rng.uniform(0.1, 0.7) / GAMMA_SCALING)
        drafts.append((min_price, GAMMA_SCALING * min_price, rng.lognormvariate(0.0, 0.6)))
    scale = calibrate([(g, cleared, q0) for _, g, q0 in drafts], beta, price, target)
    rows = []
    for k, (min_price, _, q0) in enumerate(drafts):
        unit = f"UP_{zone}_{k:03d}"
        q_hat = r3(q0 * scale)
        pieces = rng.choice([1, 1, 2, 3])
        shares = [rng.uniform(0.5, 1.5) for _ in range(pieces)]
        awarded = [r3(q_hat * s / sum(shares)) for s in shares]
        awarded[-1] = r3(q_hat - sum(awarded[:-1]))
        for t, a in enumerate(awarded):
            offer_price = min_price if t == 0 else r2(rng.uniform(min_price, cleared))
            offered = r3(a * rng.uniform(1.0, 1.3))
            rows.append(["OFF", "ACC", "MGP", unit, 20, 20241024, zone, offered, a,
                         offer_price, cleared])
        if rng.random() < 0.3:
            # an unaccepted block above the clearing price
            rows.append(["OFF", "REJ", "MGP", unit, 20, 20241024, zone,
                         r3(q_hat * 0.2), 0.0, r2(cleared * 1.5), 0.0])
    return rows


def main():
    rng = random.Random(SEED)
    demand = {}
    bid_rows = {}
    for zone, (alpha, beta, _, price) in ZONES.items():
        bid_rows[zone], demand[zone] = demand_rows(rng, zone, alpha, beta, price)

    flows = dict(FLOWS)
    a, b = demand["MALT"]
    flows[("SICI", "MALT")] = (a - ZONES["MALT"][3]) / b
    inflow = {z: 0.0 for z in ZONES}
    for (tail, head), f in flows.items():
        inflow[head] += f
        inflow[tail] -= f

    rows = []
    targets = {}
    for zone, (_, _, n, price) in ZONES.items():
        a, b = demand[zone]
        z = (a - price) / b
        targets[zone] = {"z": z, "supply": z - inflow[zone], "price": price}
        rows.extend(bid_rows[zone])
        if n:
            rows.extend(offer_rows(rng, zone, n, b, price, z - inflow[zone]))

    with open(OUT / "gme_bids.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(rows)
    with open(OUT / "gme_transit.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["from_zone", "to_zone", "capacity_mwh"])
        w.writerows(LIMITS)
    manifest = {
        "seed": SEED,
        "zones": list(ZONES),
        "producers": {z: v[2] for z, v in ZONES.items()},
        "table_alpha_beta": {z: [v[0], v[1]] for z, v in ZONES.items()},
        "target_prices": {z: v[3] for z, v in ZONES.items()},
        "saturated": [["NORD", "CNOR"], ["SUD", "CALA"], ["CALA", "SICI"]],
        "designed_flows": [[t, h, round(f, 6)] for (t, h), f in flows.items()],
        "price_groups": [["SVIZ", "NORD"], ["MONT", "SUD", "CNOR", "CSUD", "SARD"],
                         ["CALA"], ["MALT", "SICI"]],
    }
    with open(OUT / "gme_manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
