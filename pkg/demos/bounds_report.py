"""Print the entropy bounds that separate the two removal outcomes.

For every admissible degree sequence up to n_max the contradiction lower bound
should exceed the denial upper bound. The per-n margins show how wide the gap is.
"""

import sys

from entigraph import verify_separation


def main():
    n_max = int(sys.argv[1]) if len(sys.argv) > 1 else 8
    report = verify_separation(n_max)
    print(f"{len(report.rows)} sequences, {len(report.violations)} violations")
    print(" n   worst margin   best margin")
    for n, (lo, hi) in sorted(report.margins_by_n().items()):
        print(f"{n:2d}   {lo:12.4f}   {hi:11.4f}")
    tightest = min(report.rows, key=lambda r: r.margin)
    print(f"tightest: n={tightest.n} degrees={tightest.degrees} vol={tightest.vol} "
          f"lower={tightest.lower:.4f} upper={tightest.upper:.4f}")


if __name__ == "__main__":
    main()
