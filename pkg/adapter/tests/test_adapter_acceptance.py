"""End-to-end guarantees for the numpy executor spoken to over stdio.

Each test drives the real child process through the harness's own
client, exactly as a campaign would.
"""

import random
import sys

import pytest

from glofuzz.adapter_client import AdapterClient
from glofuzz.generator import GenConfig, generate
from glofuzz.mini_ir import Toolchain, lower, module_text
from glofuzz.opset import registry
from glofuzz.oracles import draw_inputs, module_interface, run_case, values_agree

ADAPTER_ARGV = [sys.executable, "-m", "npadapter.serve"]


def gen(seed, nodes):
    return generate(
        GenConfig(node_num=nodes, c_level=1, rng_seed=seed, max_rank=3, max_extent=4)
    )


def in_subset_cases(client, tc, count):
    """First `count` generated graphs whose interface the adapter declares."""
    out = []
    seed = 0
    while len(out) < count:
        g = gen(seed, nodes=random.Random(f"case:{seed}").randint(6, 14))
        m = tc.infer(lower(g))
        if client.supports(*module_interface(m)):
            out.append((seed, g, m))
        seed += 1
    return out


def test_adapter_completes_the_capability_handshake():
    with AdapterClient(ADAPTER_ARGV) as client:
        assert client.name == "npadapter"
        assert client.float_rtol == 1e-5
        assert client.pipelines == ()
        known_ops = {spec.name for spec in registry()}
        assert client.ops and client.ops <= known_ops
        assert len(client.dtypes) == 11


def test_adapter_matches_tree_backend_on_200_generated_cases():
    tc = Toolchain()
    checked = 0
    with AdapterClient(ADAPTER_ARGV) as client:
        for seed, g, m in in_subset_cases(client, tc, 200):
            text = module_text(m)
            for args in draw_inputs(g, random.Random(f"{seed}:inputs"), 2):
                want = tc.run(m, args, "tree")
                status, got = client.run(text, [], args)
                assert status == "ok", (seed, status, got)
                assert values_agree(got, want, rtol=client.float_rtol), (seed, got, want)
                checked += 1
    assert checked == 400


def test_corrupted_adapter_is_caught_as_cross_backend_inconsistency():
    tc = Toolchain()
    with AdapterClient(ADAPTER_ARGV + ["--corrupt"]) as bad:
        seed, g, _ = in_subset_cases(bad, tc, 1)[0]
        verdict = run_case(g, tc, level=1, seed=seed, adapters=[bad])
        assert verdict.outcome == "Inconsistency"
        assert verdict.oracle == "O3"
        frags = [
            f
            for f in verdict.details["fragments"]
            if f["where"].get("adapter") == "npadapter"
        ]
        assert frags and all(f["oracle"] == "O3" for f in frags)
