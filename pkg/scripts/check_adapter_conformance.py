#!/usr/bin/env python3
"""Bit-exactness audit of the numpy executor against the in-tree
reference semantics, over every operator and dtype the executor
declares.

Scalar kernels are compared bit for bit (NaN equals NaN) on a grid of
edge values crossed with random draws; on top of that, randomly
generated whole modules are spoken to a live child process and checked
against the tree backend. Any disagreement means the executor must
either be fixed or stop declaring that operator.

    python3 scripts/check_adapter_conformance.py --random 60 --modules 40
"""

import argparse
import math
import random
import struct
import sys

import numpy as np

from glofuzz.adapter_client import AdapterClient
from glofuzz.generator import GenConfig, generate
from glofuzz.mini_ir import Toolchain, lower, module_text
from glofuzz.opset import kernel, registry
from glofuzz.oracles import draw_inputs, module_interface, values_agree
from npadapter.runtime import KERNELS, NP_DTYPES


def f32(x):
    return float(np.float32(x))


EDGES = {
    "int8": [-128, -127, -8, -1, 0, 1, 2, 7, 126, 127],
    "int16": [-32768, -32767, -8, -1, 0, 1, 2, 7, 32766, 32767],
    "int32": [-(2**31), -(2**31) + 1, -8, -1, 0, 1, 2, 7, 2**31 - 2, 2**31 - 1],
    "int64": [-(2**63), -(2**63) + 1, -8, -1, 0, 1, 2, 7, 2**63 - 2, 2**63 - 1],
    "uint8": [0, 1, 2, 7, 8, 127, 128, 254, 255],
    "uint16": [0, 1, 2, 7, 65534, 65535],
    "uint32": [0, 1, 2, 7, 2**32 - 2, 2**32 - 1],
    "uint64": [0, 1, 2, 7, 2**63, 2**64 - 2, 2**64 - 1],
    # every float edge must be exactly representable at its own width
    "float32": [0.0, -0.0, 1.0, -1.0, 0.5, -2.5, 3.25, -4.0, f32(1e-45), f32(1e-40),
                f32(3.4028235e38), math.inf, -math.inf, math.nan, 2.5, -0.5],
    "float64": [0.0, -0.0, 1.0, -1.0, 0.5, -2.5, 3.25, -4.0, 5e-324, 1e-310,
                1.7976931348623157e308, math.inf, -math.inf, math.nan, 2.5, -0.5],
    "bool": [True, False],
}


def same_bits(a, b, dt):
    if dt.startswith("float"):
        if math.isnan(a) and math.isnan(b):
            return True
        fmt = "<f" if dt == "float32" else "<d"
        return struct.pack(fmt, float(a)) == struct.pack(fmt, float(b))
    return a == b


def rand_val(dt, rng):
    if dt == "bool":
        return rng.random() < 0.5
    if dt.startswith("float"):
        v = rng.randint(-64, 64) / 16.0
        return f32(v) if dt == "float32" else v
    bits = int(dt.lstrip("uint"))
    if dt.startswith("u"):
        return rng.randint(0, 2**bits - 1)
    return rng.randint(-(2 ** (bits - 1)), 2 ** (bits - 1) - 1)


def check_kernels(n_random: int, seed: int):
    rng = random.Random(seed)
    bad, checked = [], 0
    for spec in registry():
        if spec.name not in KERNELS:
            continue
        for dt in sorted(spec.admissible, key=lambda d: d.value):
            name = dt.value
            ref = kernel(spec.name, dt)
            mine = KERNELS[spec.name]
            vals = EDGES[name] + [rand_val(name, rng) for _ in range(n_random)]
            if spec.arity == 1:
                pairs = [(v,) for v in vals]
            else:
                pairs = [(a, b) for a in vals for b in EDGES[name]]
                pairs += [
                    (rand_val(name, rng), rand_val(name, rng))
                    for _ in range(5 * n_random)
                ]
            for args in pairs:
                checked += 1
                try:
                    want = ref(*args)
                except Exception as e:
                    want = ("raise", type(e).__name__)
                arrs = [np.asarray(v, dtype=NP_DTYPES[name]) for v in args]
                try:
                    got = mine(*arrs).item()
                except Exception as e:
                    got = ("raise", type(e).__name__)
                rdt = "bool" if spec.result_is_bool else name
                if isinstance(want, tuple) or isinstance(got, tuple):
                    ok = want == got
                else:
                    ok = same_bits(want, got, rdt)
                if not ok:
                    bad.append((spec.name, name, args, want, got))
    return checked, bad


def check_modules(n_modules: int, seed: int):
    tc = Toolchain()
    argv = [sys.executable, "-m", "npadapter.serve"]
    checked, bad = 0, []
    with AdapterClient(argv) as client:
        s = 0
        while checked < n_modules:
            g = generate(
                GenConfig(
                    node_num=random.Random(f"{seed}:{s}").randint(6, 16),
                    c_level=1,
                    rng_seed=seed + s,
                    max_rank=3,
                    max_extent=4,
                )
            )
            s += 1
            m = tc.infer(lower(g))
            if not client.supports(*module_interface(m)):
                continue
            checked += 1
            text = module_text(m)
            for args in draw_inputs(g, random.Random(f"{seed + s}:inputs"), 2):
                want = tc.run(m, args, "tree")
                status, got = client.run(text, [], args)
                if status != "ok" or not values_agree(got, want, client.float_rtol):
                    bad.append((seed + s, status))
    return checked, bad


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--random", type=int, default=40, help="random draws per op/dtype")
    ap.add_argument("--modules", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    checked, bad = check_kernels(args.random, args.seed)
    print(f"kernels: {checked} comparisons, {len(bad)} mismatches")
    for row in bad[:25]:
        print("  ", row)

    mchecked, mbad = check_modules(args.modules, args.seed)
    print(f"modules: {mchecked} in-subset modules, {len(mbad)} disagreements")
    for row in mbad[:25]:
        print("  ", row)
    return 1 if bad or mbad else 0


if __name__ == "__main__":
    sys.exit(main())
