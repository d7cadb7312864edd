"""Minimal exhaustive OPB solver used to exercise the external-solver path."""

import itertools
import re
import sys

text = open(sys.argv[1]).read()
n = int(re.search(r"#variable= (\d+)", text).group(1))


def terms(expr):
    return [(int(c), int(i) - 1) for c, i in re.findall(r"([+-]\d+) x(\d+)", expr)]


objective, rows = [], []
for line in text.splitlines():
    if line.startswith("*") or not line.strip():
        continue
    line = line.rstrip(" ;")
    if line.startswith("min:"):
        objective = terms(line[4:])
        continue
    lhs, op, rhs = re.match(r"(.*?)\s*(>=|=)\s*(-?\d+)$", line).groups()
    rows.append((terms(lhs), op, int(rhs)))

best = None
for x in itertools.product((0, 1), repeat=n):
    if all((sum(c * x[i] for c, i in t) >= r) if op == ">=" else (sum(c * x[i] for c, i in t) == r) for t, op, r in rows):
        val = sum(c * x[i] for c, i in objective)
        if best is None or val < best[0]:
            best = (val, x)
if best is None:
    print("s UNSATISFIABLE")
else:
    print(f"o {best[0]}")
    print("s OPTIMUM FOUND")
    print("v " + " ".join(("" if b else "-") + f"x{i + 1}" for i, b in enumerate(best[1])))
