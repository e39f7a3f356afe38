"""Regenerates the bundled example data. Deterministic; stdlib only."""
import json
import random

rng = random.Random(20240501)


def draw(n, ts0, id_prefix, errors):
    rows = []
    err = set(rng.sample(range(n), errors))
    for i in range(n):
        x1, x2 = rng.gauss(0, 1), rng.gauss(0, 1)
        y = 1 if x1 + 0.5 * x2 + rng.gauss(0, 0.5) > 0 else 0
        pred = 1 - y if i in err else y
        rows.append({
            "x1": f"{x1:.6f}", "x2": f"{x2:.6f}", "label": y, "prediction": pred,
            "group": i % 2, "patient_id": f"{id_prefix}{i // 2:04d}", "ts": ts0 + i,
        })
    return rows


def write(path, rows, cols=None):
    cols = cols or list(rows[0].keys())
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for r in rows:
            f.write(",".join(str(r[c]) for c in cols) + "\n")


train = draw(400, 0, "P", 40)
test = draw(200, 1000, "T", 12)
test94 = draw(100, 2000, "V", 6)
leak = [dict(r) for r in test]
leak[5]["x1"], leak[5]["x2"] = train[17]["x1"], train[17]["x2"]
write("train.csv", train)
write("test.csv", test)
write("test_94.csv", test94)
write("test_leak.csv", leak)

shifted = [{"x1": f"{rng.gauss(6, 1):.6f}", "x2": f"{rng.gauss(6, 1):.6f}"} for _ in range(100)]
write("ood_shifted.csv", shifted)

with open("ensemble.jsonl", "w") as f:
    for i in range(60):
        y = i % 2
        conf = rng.uniform(0.55, 0.99)
        members = []
        for _ in range(3):
            p = min(0.999, max(0.001, conf + rng.gauss(0, 0.05)))
            right = i % 10 != 0
            p1 = p if (y == 1) == right else 1 - p
            members.append([round(1 - p1, 6), round(p1, 6)])
        # Rows are re-normalised exactly after rounding.
        members = [[m[0], round(1 - m[0], 6)] for m in members]
        f.write(json.dumps({"members": members, "label": y}) + "\n")
