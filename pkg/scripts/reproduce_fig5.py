"""Covariance change on a tree of 4-vertex cliques.

Two panels: savings against the block scale x at K = 50, and against K for
a few fixed x. Writes ``fig5_x.csv`` and ``fig5_K.csv``.
"""

from _common import fresh, parser, write_rows
from ordered_qcd.montecarlo import ExperimentConfig, ScenarioSpec, sweep

SCALES = [1, 1.5, 2, 3, 5, 10]
KS = [10, 20, 30, 40, 50]


def tree(K, x, args):
    return ExperimentConfig(
        ScenarioSpec({"kind": "tree", "K": K}, {"kind": "cov_change", "x": x}),
        runs=args.runs, master_seed=args.seed)


def main():
    args = parser(__doc__.splitlines()[0], "out/fig5").parse_args()
    by_x = fresh(args.out / "fig5_x.csv")
    write_rows(by_x, "tree K=50", sweep(tree(50, 1.0, args), "x", SCALES))
    by_K = fresh(args.out / "fig5_K.csv")
    for x in (2, 10):
        write_rows(by_K, f"tree x={x}", sweep(tree(10, x, args), "K", KS))
    print(f"wrote {by_x} and {by_K}")


if __name__ == "__main__":
    main()
