"""Compare the compiled and numpy min-sum decoders on noisy codewords.

Usage: python benchmarks/bench_kernels.py [--frames 200] [--repeat 3] [--ebn0 2.0]
"""

import argparse
import time

import numpy as np

from ftnlab import coding, kernels, modem
from ftnlab.harness import ebn0_to_n0


def noisy_llrs(code, frames, ebn0_db, rng):
    info = rng.integers(0, 2, size=(frames, code.k), dtype=np.uint8)
    x = modem.qpsk_modulate(coding.ldpc_encode(info, code))
    n0 = float(ebn0_to_n0(ebn0_db))
    y = x + np.sqrt(n0 / 2) * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
    return modem.med_demap(y.reshape(-1), n0).llrs.reshape(frames, -1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--ebn0", type=float, default=2.0)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    impls = kernels.backends()
    print(f"default backend: {kernels.BACKEND}; available: {', '.join(impls)}")
    for rate in coding.SHIPPED_RATES:
        code = coding.load_code(rate)
        llrs = np.clip(noisy_llrs(code, args.frames, args.ebn0, rng), -50, 50)
        times, outs = {}, {}
        for name in impls:
            best = float("inf")
            for _ in range(args.repeat):
                t = time.perf_counter()
                outs[name] = kernels.minsum_decode(llrs, code.graph, 0.75, 50, backend=name)
                best = min(best, time.perf_counter() - t)
            times[name] = best
        same = all(np.array_equal(outs[n][0], outs["python"][0]) for n in outs)
        line = "  ".join(f"{n} {t * 1e3 / args.frames:.3f} ms/codeword" for n, t in times.items())
        speed = f"  speedup {times['python'] / times['cython']:.1f}x" if "cython" in times else ""
        print(f"rate {rate}: {line}{speed}  identical={same}")


if __name__ == "__main__":
    main()
