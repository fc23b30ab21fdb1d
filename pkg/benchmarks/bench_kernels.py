"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py            # kernel micro-benchmarks
    python3 benchmarks/bench_kernels.py --epoch    # plus one training epoch per backend

The epoch comparison runs in subprocesses so that ``NOTENET_DISABLE_NUMBA``
selects the backend exactly as it would for a user.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from notenet import _kernels

EPOCH_SCRIPT = """
import json, time
import numpy as np
from notenet import KERNEL_BACKEND
from notenet.corpus import EncodedBatch
from notenet.train import Adam, TrainConfig, train_epoch
from notenet.zoo import ModelSpec, build
rng = np.random.default_rng(0)
n, L, V = {n}, {L}, 2000
data = EncodedBatch(rng.integers(0, V + 2, size=(n, L)), np.arange(n) % 2, L)
out = {{"backend": KERNEL_BACKEND}}
for mid in {models!r}:
    model = build(ModelSpec.create(mid, V, L))
    cfg = TrainConfig()
    opt = Adam(model.parameters(), cfg.learning_rate)
    train_epoch(model, EncodedBatch(data.sequences[:32], data.labels[:32], L), opt, cfg)  # warm-up
    t0 = time.perf_counter()
    train_epoch(model, data, opt, cfg)
    out[mid] = time.perf_counter() - t0
print(json.dumps(out))
"""


def kernel_cases(rng, n, L, h, c):
    xw = rng.normal(size=(n, L, 4 * h)).astype(np.float32)
    U = (0.1 * rng.normal(size=(h, 4 * h))).astype(np.float32)
    x = rng.normal(size=(n, L, c)).astype(np.float32)
    D = rng.normal(size=(5, c)).astype(np.float32)
    idx = rng.integers(0, 2002, size=n * L)
    rows = rng.normal(size=(n * L, c)).astype(np.float32)

    def lstm_fb(k):
        hs, cs, gates = k.lstm_forward(xw, U, None)
        k.lstm_backward(np.ones_like(hs), hs, cs, gates, U, None)

    def pool(k):
        out, arg = k.maxpool_forward(x, 2, 2)
        k.maxpool_backward(np.ones_like(out), arg, L)

    def depthwise(k):
        out = k.depthwise_forward(x, D)
        k.depthwise_backward(np.ones_like(out), x, D)

    def scatter(k):
        k.scatter_add_rows(np.zeros((2002, c), np.float32), idx, rows)

    return {"lstm fwd+bwd": lstm_fb, "maxpool fwd+bwd": pool,
            "depthwise fwd+bwd": depthwise, "embedding scatter": scatter}


def bench_kernels(args):
    rng = np.random.default_rng(0)
    cases = kernel_cases(rng, args.batch, args.length, args.hidden, args.channels)
    backends = {name: _kernels.load_backend(name) for name in _kernels.available_backends()}
    for k in backends.values():  # compile and warm caches
        for fn in cases.values():
            fn(k)
    print(f"batch {args.batch}, length {args.length}, hidden {args.hidden}, channels {args.channels}")
    print(f"{'kernel':<20}" + "".join(f"{b + ' ms':>12}" for b in backends) + f"{'speedup':>10}")
    for label, fn in cases.items():
        ms = {b: 1e3 * min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
              for b, k in backends.items()}
        speed = ms["numpy"] / ms["numba"] if "numba" in ms else float("nan")
        print(f"{label:<20}" + "".join(f"{v:>12.2f}" for v in ms.values()) + f"{speed:>9.1f}x")


def bench_epoch(args):
    script = EPOCH_SCRIPT.format(n=args.epoch_docs, L=args.length, models=list(args.models))
    rows = []
    for disable in ("0", "1"):
        env = dict(os.environ, NOTENET_DISABLE_NUMBA=disable)
        res = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True,
                             text=True, check=True)
        rows.append(json.loads(res.stdout))
    print(f"\none training epoch, {args.epoch_docs} documents of length {args.length} (seconds)")
    print(f"{'model':<8}" + "".join(f"{r['backend']:>10}" for r in rows))
    for m in args.models:
        print(f"{m:<8}" + "".join(f"{r[m]:>10.2f}" for r in rows))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=32)
    ap.add_argument("--length", type=int, default=298)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--channels", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--epoch", action="store_true", help="also time one training epoch per backend")
    ap.add_argument("--epoch-docs", type=int, default=256)
    ap.add_argument("--models", default="agk", help="model ids for --epoch")
    args = ap.parse_args()
    bench_kernels(args)
    if args.epoch:
        bench_epoch(args)


if __name__ == "__main__":
    main()
