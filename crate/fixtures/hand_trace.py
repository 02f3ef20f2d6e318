"""Independent oracle for the six-sample selection fixture.

Recomputes every intermediate quantity in plain Python floats and writes
hand_trace.json next to this script. Distances are Euclidean on integer
coordinates; proximity is measured against the raw seed rows.
"""
import itertools
import json
import math
import os

seed = [[0, 0], [4, 0]]
pool = [[2, -2], [-1, -1], [2, 1], [5, 5], [4, 1], [5, 2]]
ecle = [0.75, 1.5, 1.25, 2.5, 1.0, 2.0]
alpha, budget, factor = 0.3, 2, 1.5


def dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def standardize(v):
    n = len(v)
    mean = sum(v) / n
    std = math.sqrt(sum((x - mean) ** 2 for x in v) / n)
    return [(x - mean) / std for x in v]


prox = [min(dist(p, s) for s in seed) for p in pool]
nt, npx = standardize(ecle), standardize(prox)
q = [alpha * t - (1 - alpha) * p for t, p in zip(nt, npx)]
c = math.ceil(factor * budget)
order = sorted(range(len(pool)), key=lambda i: (-q[i], i))
cands = sorted(order[:c])

everything = seed + pool
cover = [min(dist(x, s) for s in seed) for x in everything]
mins = {j: cover[len(seed) + j] for j in cands}
picks, steps = [], []
for _ in range(budget):
    u = max(sorted(mins), key=lambda j: (mins[j], -j))
    steps.append({"pick": u, "distance_to_centers": mins.pop(u)})
    picks.append(u)
    for j in mins:
        mins[j] = min(mins[j], dist(pool[j], pool[u]))


def terms(sel):
    t = sum(ecle[j] for j in sel)
    d = sum(prox[j] for j in sel) / len(sel)
    centers = seed + [pool[j] for j in sel]
    h = max(min(dist(x, z) for z in centers) for x in everything)
    return t, d, h


t, d, h = terms(picks)
values = sorted(
    (a - b - c_, list(s))
    for s in itertools.combinations(range(len(pool)), budget)
    for a, b, c_ in [terms(s)]
)[::-1]
value = t - d - h
rank = 1 + sum(1 for v, _ in values if v > value + 1e-12)

out = {
    "seed": seed,
    "pool": pool,
    "ecle": ecle,
    "alpha": alpha,
    "budget": budget,
    "candidate_factor": factor,
    "distance": "euclidean",
    "use_prototypes": False,
    "expected": {
        "proximity": prox,
        "tailness_component": nt,
        "proximity_component": npx,
        "q": q,
        "candidates": cands,
        "steps": steps,
        "selected": picks,
        "objective": {"tailness": t, "proximity": d, "coverage_radius": h, "value": value},
        "objective_rank": rank,
        "subset_values": [{"subset": s, "value": v} for v, s in values],
    },
}
path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "hand_trace.json")
with open(path, "w") as f:
    json.dump(out, f, indent=2)
    f.write("\n")
print(json.dumps(out["expected"], indent=1)[:1500])
