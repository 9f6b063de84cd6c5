"""Regenerate the bundled tiny dataset, its statements and the golden results.

The golden rows come from a plain linear scan written here, independent of
the Rust code. With 60 objects every pair is used for the scale estimate,
so scale = 2 * lower-median over all pairs.

    python3 make_tiny.py
"""
import json
import math
import random

rng = random.Random(20240611)
ALPHA = "abcdefgh"
N = 60


def word():
    return "".join(rng.choice(ALPHA) for _ in range(rng.randint(4, 10)))


rows = []
for i in range(N):
    rows.append({
        "id": 1000 + 7 * i,
        "features": [round(rng.uniform(0, 10), 3) for _ in range(4)],
        "loc": [round(rng.uniform(48.0, 49.0), 4), round(rng.uniform(2.0, 3.0), 4)],
        "review": word(),
    })


def l1(a, b):
    return sum(abs(x - y) for x, y in zip(a, b))


def l2(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def edit(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


SPACES = [("features", l1), ("loc", l2), ("review", edit)]


def scale(name, f):
    d = sorted(f(rows[i][name], rows[j][name]) for i in range(N) for j in range(i + 1, N))
    med = d[(len(d) - 1) // 2]
    return 2 * med if med > 0 else 1.0


scales = [scale(n, f) for n, f in SPACES]


def dist(q, o, w):
    total = 0.0
    for (name, f), s, wi in zip(SPACES, scales, w):
        if wi != 0:
            total += wi * (f(q[name], o[name]) / s)
    return total


def query_object():
    base = rng.choice(rows)
    return {
        "features": [round(x + rng.uniform(-1, 1), 3) for x in base["features"]],
        "loc": [round(base["loc"][0] + rng.uniform(-0.05, 0.05), 4), round(base["loc"][1] + rng.uniform(-0.05, 0.05), 4)],
        "review": base["review"][:-1] + rng.choice(ALPHA),
    }


def literal(q, w):
    return "{" + ", ".join(f'"{n}": {json.dumps(q[n])}' for (n, _), wi in zip(SPACES, w) if wi != 0) + "}"


statements, golden = [], []
weight_sets = [[1, 1, 1], [0.5, 0.3, 0.2], [1, 0, 0.5], [0.2, 1, 0]]
for t in range(12):
    q = query_object()
    w = weight_sets[t % 4]
    ranked = sorted(((dist(q, o, w), o["id"]) for o in rows))
    if t % 2 == 0:
        c = 3 + t % 5
        r = round((ranked[c - 1][0] + ranked[c][0]) / 2, 4)
        assert ranked[c - 1][0] < r < ranked[c][0]
        hits = [h for h in ranked if h[0] <= r]
        statements.append(f"SELECT * FROM places WHERE places.obj IN ODBRANGE({literal(q, w)}, {w}, {r})")
    else:
        k = [1, 3, 5, 10, 60, 70][t // 2]
        hits = ranked[:k]
        statements.append(f"SELECT * FROM places WHERE places.obj IN ODBKNN({literal(q, w)}, {w}, {k})")
    golden.append({"statement": len(statements), "ids": [h[1] for h in hits], "distances": [h[0] for h in hits]})

with open("tiny.jsonl", "w") as f:
    for r in rows:
        f.write(json.dumps(r) + "\n")
with open("tiny_queries.sql", "w") as f:
    f.write("-- Statements over the bundled tiny dataset; see tiny_golden.jsonl.\n")
    for s in statements:
        f.write(s + "\n")
with open("tiny_golden.jsonl", "w") as f:
    for g in golden:
        f.write(json.dumps(g) + "\n")
