#!/usr/bin/env python3
"""Write the 442-patient diabetes table (Efron et al., LARS) to data/diabetes.tab.

Tries the original Stanford URL first and falls back to the copy bundled
with scikit-learn. Output is tab-separated with a header row.
"""
import pathlib
import sys
import urllib.request

URL = "https://web.stanford.edu/~hastie/Papers/LARS/diabetes.data"
NAMES = ["age", "sex", "bmi", "map", "tc", "ldl", "hdl", "tch", "ltg", "glu", "y"]


def rows_from_url():
    with urllib.request.urlopen(URL, timeout=20) as resp:
        lines = resp.read().decode().strip().splitlines()
    return [line.split() for line in lines[1:]]


def rows_from_sklearn():
    from sklearn.datasets import load_diabetes

    d = load_diabetes(scaled=False)
    return [[repr(float(v)) for v in list(x) + [t]] for x, t in zip(d.data, d.target)]


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/diabetes.tab")
    try:
        rows = rows_from_url()
    except Exception as err:  # network is optional
        print(f"download failed ({err}); using scikit-learn copy", file=sys.stderr)
        rows = rows_from_sklearn()
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as f:
        f.write("\t".join(NAMES) + "\n")
        for r in rows:
            f.write("\t".join(r) + "\n")
    print(f"wrote {len(rows)} rows to {out}")


if __name__ == "__main__":
    main()
