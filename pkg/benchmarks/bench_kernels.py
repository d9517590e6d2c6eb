"""Time the compiled string kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --n 7 8 9 --repeat 5

Prints one line per (kernel, flavor, N) with the best-of-``repeat`` wall time
for each backend and the speedup.
"""
import argparse
import time

import numpy as np

from twolocal import kernels
from twolocal.localizer import LocalizationProblem, cost_and_gradient
from twolocal.pauli import LocalHamiltonian, enumerate_basis, materialize, project_onto_subspace
from twolocal.spectra import sample_spectrum


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, flavor, rng):
    basis = enumerate_basis(n, flavor)
    h = rng.standard_normal(len(basis))
    H = materialize(LocalHamiltonian(basis, h))
    _, V = np.linalg.eigh(H)
    masks = basis.masks()
    problem = LocalizationProblem(sample_spectrum(n, 0), basis)
    return {
        "materialize": lambda: materialize(LocalHamiltonian(basis, h)),
        "project": lambda: project_onto_subspace(H, basis),
        "diag_expectations": lambda: kernels.diag_expectations(V, *masks),
        "cost_and_gradient": lambda: cost_and_gradient(h, problem),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[7, 8, 9])
    p.add_argument("--flavors", nargs="+", default=["real_2local", "complex_2local"])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    try:
        kernels.use_backend("cython")
    except ImportError:
        raise SystemExit("compiled kernels are not built; nothing to compare")

    print(f"{'kernel':<18} {'flavor':<15} {'N':>2} {'cython':>10} {'python':>10} {'speedup':>8}")
    for flavor in args.flavors:
        for n in args.n:
            fns = cases(n, flavor, np.random.default_rng(n))
            for name, fn in fns.items():
                timing = {}
                for backend in ("cython", "python"):
                    kernels.use_backend(backend)
                    fn()  # warm up
                    timing[backend] = best_of(fn, args.repeat)
                kernels.use_backend("cython")
                print(f"{name:<18} {flavor:<15} {n:>2} {timing['cython']:>10.4f} "
                      f"{timing['python']:>10.4f} {timing['python'] / timing['cython']:>7.1f}x")


if __name__ == "__main__":
    main()
