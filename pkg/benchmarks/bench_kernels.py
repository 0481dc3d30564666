"""Time the simplex and tree-growing kernels under numba and plain numpy.

    python3 benchmarks/bench_kernels.py --sizes 100,1000,10000 --repeats 50

"""
import argparse

from cargo_recovery.bench import bench_kernels, format_table

def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="100,1000,10000")
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    sizes = tuple(int(s) for s in args.sizes.split(","))
    rows = bench_kernels(sizes, repeats=args.repeats, seed=args.seed)
    print(format_table(rows))
    if not all(r["agree"] for r in rows):
        raise SystemExit("backends disagree on at least one kernel input")

if __name__ == "__main__":
    main()
