"""Compiled versus pure-Python Fock propagation.

Times one two-mode step and a full ``fock_joint`` on the mirror-symmetric
detector pair for a few photon numbers, checks that both implementations
agree, and prints a table.

    python3 benchmarks/bench_kernel.py [--sizes 20 40 80] [--repeat 3]
"""

import argparse
import time

import numpy as np

from bosecount.detectors import build_dilation, paper_pair
from bosecount.kernel import backend, network


def _best(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[20, 40, 80])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not backend.compiled_available():
        print("compiled extension not built; only the Python kernel is available")
    net = build_dilation(paper_pair(0.867))
    print(f"{'N_a=N_b':>8} {'configs':>10} {'impl':>9} {'step_s':>10} {'joint_s':>10} {'max|diff|':>10}")
    for n in args.sizes:
        s = 2 * n
        plan = network._plan(net, s)
        i, flat, offs = plan.steps[0]
        dim = network.configuration_count(s, net.n_rows)
        rng = np.random.default_rng(0)
        state = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        results = {}
        for name in ("compiled", "python"):
            if name == "compiled" and not backend.compiled_available():
                continue
            impl = backend.get_impl(name)
            impl.apply_two_mode(state, s, net.n_rows, i, i + 1, flat, offs)  # warm index caches
            t_step, _ = _best(lambda: impl.apply_two_mode(state, s, net.n_rows, i, i + 1, flat, offs), args.repeat)
            t_joint, tab = _best(lambda: network.fock_joint(n, n, net, impl=name).probs, args.repeat)
            results[name] = tab
            diff = np.max(np.abs(tab - results["compiled"])) if "compiled" in results else float("nan")
            print(f"{n:>8} {dim:>10} {name:>9} {t_step:>10.4f} {t_joint:>10.4f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
