"""Parser, kernel, and protocol semantics pinned to frozen values.

The kernels promise bit-exact agreement with the harness reference on
the declared subset, so the expectations here are spelled out as exact
numbers rather than tolerances.
"""

import io
import json
import math

import numpy as np
import pytest

from npadapter.irtext import (
    Call,
    Const,
    Let,
    ParseError,
    Prim,
    UnsupportedConstruct,
    parse_module,
    scan_interface,
)
from npadapter.runtime import (
    EvalError,
    KERNELS,
    NP_DTYPES,
    SUPPORTED_DTYPES,
    SUPPORTED_OPS,
    run_main,
)
from npadapter.serve import (
    FLOAT_RTOL,
    capability,
    corrupt_value,
    decode_value,
    encode_value,
    handle_run,
    serve,
)

INT_MIN32 = -(2**31)


def arr(v, dt):
    return np.asarray(v, dtype=NP_DTYPES[dt])


def k(op, dt, *args):
    return KERNELS[op](*(arr(v, dt) for v in args)).item()


# -- integer division family ----------------------------------------------------------


@pytest.mark.parametrize(
    "a,b,want",
    [
        (7, 2, 3),
        (-7, 2, -3),
        (7, -2, -3),
        (-7, -2, 3),
        (1, 0, 0),
        (-5, 0, 0),
        (INT_MIN32, -1, INT_MIN32),
    ],
)
def test_int_divide_truncates_and_division_by_zero_is_zero(a, b, want):
    assert k("divide", "int32", a, b) == want


@pytest.mark.parametrize(
    "a,b,want",
    [
        (7, 2, 1),
        (-7, 2, -1),
        (7, -2, 1),
        (-7, -2, -1),
        (5, 0, 0),
        (INT_MIN32, -1, 0),
    ],
)
def test_int_mod_takes_dividend_sign(a, b, want):
    assert k("mod", "int32", a, b) == want


@pytest.mark.parametrize(
    "a,b,want",
    [
        (7, 2, 3),
        (-7, 2, -4),
        (7, -2, -4),
        (-7, -2, 3),
        (5, 0, 0),
        (INT_MIN32, -1, INT_MIN32),
    ],
)
def test_int_floor_divide_rounds_down_and_wraps(a, b, want):
    assert k("floor_divide", "int32", a, b) == want


@pytest.mark.parametrize(
    "a,b,want",
    [(7, 2, 1), (-7, 2, 1), (7, -2, -1), (-7, -2, -1), (5, 0, 0)],
)
def test_int_floor_mod_takes_divisor_sign(a, b, want):
    assert k("floor_mod", "int32", a, b) == want


# -- wraparound ------------------------------------------------------------------------


def test_int_arithmetic_wraps_modulo_width():
    assert k("add", "uint8", 255, 1) == 0
    assert k("multiply", "int8", 64, 4) == 0
    assert k("add", "uint64", 2**64 - 1, 1) == 0
    assert k("subtract", "uint16", 0, 1) == 65535
    assert k("abs", "int32", INT_MIN32) == INT_MIN32
    assert k("negative", "int32", INT_MIN32) == INT_MIN32
    assert k("negative", "uint8", 1) == 255


def test_shift_counts_reduce_modulo_width():
    assert k("left_shift", "int32", 1, 33) == 2
    assert k("left_shift", "int32", 1, 32) == 1
    assert k("left_shift", "int32", 3, 31) == INT_MIN32
    assert k("left_shift", "int32", 1, -1) == INT_MIN32  # -1 mod 32 == 31
    assert k("left_shift", "uint8", 200, 1) == 144
    assert k("left_shift", "uint8", 1, 9) == 2
    assert k("right_shift", "int32", -8, 1) == -4  # arithmetic shift
    assert k("right_shift", "int32", INT_MIN32, 31) == -1
    assert k("right_shift", "int32", 1, 33) == 0


# -- float division family ---------------------------------------------------------


def test_float_divide_follows_ieee_signs():
    assert k("divide", "float64", 1.0, 0.0) == math.inf
    assert k("divide", "float64", -1.0, 0.0) == -math.inf
    assert k("divide", "float64", 1.0, -0.0) == -math.inf
    assert math.isnan(k("divide", "float64", 0.0, 0.0))


def test_float_mod_is_fmod():
    assert k("mod", "float64", 5.5, 2.0) == 1.5
    assert k("mod", "float64", -5.5, 2.0) == -1.5
    assert k("mod", "float64", 5.5, -2.0) == 1.5
    assert math.isnan(k("mod", "float64", 3.0, 0.0))


def test_float_floor_mod_takes_divisor_sign():
    assert k("floor_mod", "float64", 5.5, 2.0) == 1.5
    assert k("floor_mod", "float64", -5.5, 2.0) == 0.5
    assert k("floor_mod", "float64", 5.5, -2.0) == -0.5
    assert math.isnan(k("floor_mod", "float64", 3.0, 0.0))


def test_float_floor_divide_normalizes_zero_sign():
    assert k("floor_divide", "float64", 7.5, 2.0) == 3.0
    assert k("floor_divide", "float64", -7.5, 2.0) == -4.0
    assert k("floor_divide", "float64", 1.0, 0.0) == math.inf
    assert k("floor_divide", "float64", -1.0, 0.0) == -math.inf
    assert math.isnan(k("floor_divide", "float64", 0.0, 0.0))
    # a finite quotient that floors to zero always comes out +0.0
    for a, b in [(-0.0, 1.0), (1.0, math.inf), (-1.0, math.inf), (0.0, -2.0)]:
        r = k("floor_divide", "float64", a, b)
        assert r == 0.0 and math.copysign(1.0, r) == 1.0


# -- rounding family ---------------------------------------------------------------


def test_round_halves_to_even():
    assert k("round", "float64", 0.5) == 0.0
    assert k("round", "float64", 1.5) == 2.0
    assert k("round", "float64", 2.5) == 2.0
    assert k("round", "float64", -1.5) == -2.0
    assert k("round", "float64", 3.5) == 4.0


def test_rounding_family_normalizes_zero_sign():
    for op, x in [
        ("round", -0.5),
        ("ceil", -0.5),
        ("trunc", -0.9),
        ("floor", -0.0),
    ]:
        r = k(op, "float64", x)
        assert r == 0.0 and math.copysign(1.0, r) == 1.0
    assert k("floor", "float64", -0.5) == -1.0
    assert k("floor", "float64", math.inf) == math.inf
    assert math.isnan(k("round", "float64", math.nan))


# -- extrema ------------------------------------------------------------------------


def test_extrema_keep_first_operand_on_ties_and_propagate_nan():
    r = k("maximum", "float64", 0.0, -0.0)
    assert r == 0.0 and math.copysign(1.0, r) == 1.0
    r = k("maximum", "float64", -0.0, 0.0)
    assert r == 0.0 and math.copysign(1.0, r) == -1.0
    r = k("minimum", "float64", -0.0, 0.0)
    assert r == 0.0 and math.copysign(1.0, r) == -1.0
    assert math.isnan(k("maximum", "float64", math.nan, 1.0))
    assert math.isnan(k("maximum", "float64", 1.0, math.nan))
    assert math.isnan(k("minimum", "float64", math.nan, 1.0))
    assert k("maximum", "float64", 3.0, 7.0) == 7.0
    assert k("minimum", "int32", -5, 3) == -5


# -- roots --------------------------------------------------------------------------


def test_rsqrt_edge_values():
    assert k("rsqrt", "float32", 4.0) == 0.5
    assert k("rsqrt", "float32", 0.0) == math.inf
    assert k("rsqrt", "float32", -0.0) == -math.inf
    assert math.isnan(k("rsqrt", "float32", -1.0))
    assert k("rsqrt", "float32", math.inf) == 0.0
    assert math.isnan(k("sqrt", "float32", -1.0))


def test_float32_kernels_round_to_single_precision():
    assert k("add", "float32", 1.0, 2.0**-24) == 1.0  # tie, rounds to even
    assert k("add", "float32", 2.0**24 - 1, 2.0) == 2.0**24
    assert k("multiply", "float32", 1e20, 1e20) == math.inf


def test_comparisons_yield_bools():
    out = KERNELS["less"](arr(1, "int32"), arr(2, "int32"))
    assert out.dtype == np.dtype(bool) and out.item() is True
    assert k("equal", "float64", math.nan, math.nan) is False
    assert k("not_equal", "float64", math.nan, math.nan) is True


# -- module text -----------------------------------------------------------------------

MODULE = """(fn f1 () (let c (const int32[2] 5 -6) (tuple c)))
(fn main ((x int32[2]) (y float32[]))
  (let t (call (fnref f1))
  (let v (proj t 0)
  (prim add x v))))"""


def test_parse_module_structure():
    funcs = parse_module(MODULE)
    assert set(funcs) == {"f1", "main"}
    main = funcs["main"]
    assert main.params == (("x", "int32", (2,)), ("y", "float32", ()))
    assert isinstance(main.body, Let) and isinstance(main.body.value, Call)
    inner = main.body.body.body
    assert isinstance(inner, Prim) and inner.op == "add"
    c = funcs["f1"].body.value
    assert c == Const("int32", (2,), (5, -6))


def test_parse_const_atoms():
    funcs = parse_module("(fn main () (const bool[2] true false))")
    assert funcs["main"].body.data == (True, False)
    funcs = parse_module("(fn main () (const float64[3] nan inf -inf))")
    a, b, c = funcs["main"].body.data
    assert math.isnan(a) and b == math.inf and c == -math.inf


@pytest.mark.parametrize(
    "text",
    [
        "(fn helper () (const int32[] 1))",  # no main
        "(fn main ((x int7[])) x)",  # unknown dtype
        "(fn main () (const bool[] maybe))",  # bad bool literal
        "(fn main () (const int32[] 1.5))",  # bad int literal
        "(fn main () (prim))",  # prim without an operator
        "(fn main () (proj (tuple) one))",  # non-numeric index
        "(fn main () (const int32[] 1)",  # unclosed form
        "(fn main () (const int32[] 1)) stray",  # trailing garbage
        "(fn main () (unknown_form 1))",
    ],
)
def test_malformed_text_raises_parse_error(text):
    with pytest.raises(ParseError):
        parse_module(text)


def test_closures_are_reported_unsupported_not_guessed():
    text = "(fn main () (call (closure (p) p) (const int32[] 1)))"
    with pytest.raises(UnsupportedConstruct):
        parse_module(text)


def test_scan_interface_collects_ops_and_dtypes():
    ops, dts = scan_interface(parse_module(MODULE))
    assert ops == {"add"}
    assert dts == {"int32", "float32"}


# -- evaluation --------------------------------------------------------------------


def test_run_main_evaluates_lets_calls_and_projections():
    funcs = parse_module(MODULE)
    out = run_main(funcs, [np.array([1, 2], np.int32), np.float32(0.5)])
    assert out.dtype == np.dtype(np.int32)
    assert out.tolist() == [6, -4]


def test_run_main_binds_callee_parameters():
    text = """(fn twice ((a int32[2])) (prim add a a))
(fn main ((x int32[2])) (call (fnref twice) x))"""
    out = run_main(parse_module(text), [np.array([3, -4], np.int32)])
    assert out.tolist() == [6, -8]


def test_run_main_rejects_wrong_arity():
    with pytest.raises(EvalError, match="expects 2 arguments"):
        run_main(parse_module(MODULE), [np.array([1, 2], np.int32)])


def test_run_main_rejects_unbound_names_and_bad_projections():
    with pytest.raises(EvalError, match="unbound"):
        run_main(parse_module("(fn main () ghost)"), [])
    with pytest.raises(EvalError, match="projection"):
        run_main(parse_module("(fn main () (proj (tuple) 0))"), [])
    with pytest.raises(EvalError, match="non-function"):
        run_main(parse_module("(fn main () (call (const int32[] 1)))"), [])


def test_run_main_flags_undeclared_operators():
    with pytest.raises(UnsupportedConstruct):
        run_main(parse_module("(fn main ((x float32[])) (prim tanh x))"), [np.float32(0)])


# -- protocol layer -----------------------------------------------------------------


def test_capability_declaration():
    cap = capability()
    assert cap["name"] == "npadapter"
    assert cap["float_rtol"] == FLOAT_RTOL == 1e-5
    assert cap["pipelines"] == []
    assert tuple(cap["ops"]) == SUPPORTED_OPS and len(cap["ops"]) == 39
    assert set(cap["dtypes"]) == set(SUPPORTED_DTYPES) and len(cap["dtypes"]) == 11


def test_value_encoding_survives_json_and_nonfinite_floats():
    v = (
        np.array([math.nan, math.inf, -math.inf, -0.0], np.float64),
        np.array([[1, 2], [3, 4]], np.int16),
        np.array(True),
    )
    wire = json.loads(json.dumps(encode_value(v)))
    back = decode_value(wire)
    assert math.isnan(back[0][0]) and back[0][1] == math.inf and back[0][2] == -math.inf
    assert math.copysign(1.0, back[0][3]) == -1.0
    assert back[1].dtype == np.dtype(np.int16) and back[1].tolist() == [[1, 2], [3, 4]]
    assert back[2].dtype == np.dtype(bool) and back[2].item() is True


def test_corrupt_value_is_never_the_right_answer():
    cases = [
        np.array([0, 1, 127, -128], np.int8),
        np.array([0, 2**64 - 1], np.uint64),
        np.array([True, False]),
        np.array([0.0, -0.0, 1.5, -3.25, 1e30], np.float32),
    ]
    for a in cases:
        c = corrupt_value(a)
        assert c.dtype == a.dtype and c.shape == a.shape
        assert not np.any(c == a)
    t = corrupt_value((np.array(7, np.int32), (np.array(0.0),)))
    assert t[0].item() == 8 and t[1][0].item() == 1.0


def run_msg(text, inputs=(), pipeline=(), corrupt=False):
    return handle_run(
        {
            "cmd": "run",
            "ir_text": text,
            "pipeline": list(pipeline),
            "inputs": [encode_value(v) for v in inputs],
        },
        corrupt,
    )


def test_handle_run_evaluates_in_subset_modules():
    reply = run_msg(MODULE, [np.array([1, 2], np.int32), np.float32(0.5)])
    assert reply["status"] == "ok"
    assert decode_value(reply["outputs"]).tolist() == [6, -4]


def test_handle_run_answers_unsupported_outside_capability():
    tanh = "(fn main ((x float32[])) (prim tanh x))"
    assert run_msg(tanh, [np.float32(0)])["status"] == "unsupported"
    closure = "(fn main () (call (closure (p) p) (const int32[] 1)))"
    assert run_msg(closure)["status"] == "unsupported"
    with_pipeline = run_msg(MODULE, [np.array([1, 2], np.int32), np.float32(0.5)], ["fold"])
    assert with_pipeline["status"] == "unsupported"


def test_handle_run_reports_evaluation_failures_as_errors():
    reply = run_msg(MODULE, [])  # arity mismatch
    assert reply["status"] == "error" and "EvalError" in reply["trace"]
    reply = run_msg("(fn main () (const int32[] zzz))")
    assert reply["status"] == "error" and "ParseError" in reply["trace"]


def test_handle_run_corrupt_mode_breaks_every_output():
    good = run_msg(MODULE, [np.array([1, 2], np.int32), np.float32(0.5)])
    bad = run_msg(MODULE, [np.array([1, 2], np.int32), np.float32(0.5)], corrupt=True)
    assert decode_value(bad["outputs"]).tolist() == [7, -3]
    assert decode_value(good["outputs"]).tolist() != decode_value(bad["outputs"]).tolist()


def serve_lines(*lines):
    out = io.StringIO()
    rc = serve(io.StringIO("".join(l + "\n" for l in lines)), out, corrupt=False)
    return rc, [json.loads(l) for l in out.getvalue().splitlines()]


def test_serve_handles_a_whole_conversation():
    run = json.dumps(
        {
            "cmd": "run",
            "ir_text": "(fn main () (const int32[] 9))",
            "pipeline": [],
            "inputs": [],
        }
    )
    rc, replies = serve_lines(json.dumps({"cmd": "hello"}), "", run)
    assert rc == 0
    assert replies[0]["name"] == "npadapter"
    assert replies[1]["status"] == "ok"
    assert decode_value(replies[1]["outputs"]).item() == 9


@pytest.mark.parametrize(
    "line",
    ["{not json", "[1, 2]", '{"no_cmd": 1}', '{"cmd": "quit"}'],
)
def test_serve_dies_loudly_on_protocol_violations(line, capsys):
    rc, replies = serve_lines(line)
    assert rc == 1 and replies == []
    assert "npadapter:" in capsys.readouterr().err
