"""Type inference over the expression IR: result types, structured error
traces, and scope handling."""

import pytest

from glofuzz.dtypes import DType, TensorValue
from glofuzz import mini_ir as mir
from glofuzz.mini_ir.infer import IrTypeError, infer_types


def module_of(text: str) -> mir.IrModule:
    return mir.parse_module(text)


def scalar_const(dt: DType, v) -> str:
    return f"(const {dt.value}[] {v})"


def test_annotations_cover_every_expression():
    m = module_of(
        "(fn helper ((p int32[2])) (tuple (prim negative p)))\n"
        "(fn main ((x int32[2]))\n"
        "  (let n (call (fnref helper) x)\n"
        "  (proj n 0)))\n"
    )
    tm = infer_types(m)
    for fn in tm.funcs.values():
        assert fn.ret is not None
        for e in mir.walk(fn.body):
            assert e.ty is not None, e
    assert tm.main.ret == mir.TensorType(DType.INT32, (2,))
    # The input module is untouched: inference returns a new module.
    assert m.main.body.ty is None


def test_const_and_prim_result_types():
    m = module_of(
        "(fn main ()\n"
        "  (prim add (const int32[2,1] 1 2) (const int32[3] 3 4 5)))\n"
    )
    assert infer_types(m).main.ret == mir.TensorType(DType.INT32, (2, 3))


def test_comparison_result_is_bool():
    m = module_of(
        "(fn main ((x float32[4])) (prim less x (const float32[] 0.5)))\n"
    )
    assert infer_types(m).main.ret == mir.TensorType(DType.BOOL, (4,))


def test_dtype_mismatch_trace_format():
    m = module_of(
        "(fn main ((x int32[])) (prim add x (const float32[] 1.0)))\n"
    )
    with pytest.raises(IrTypeError) as exc:
        infer_types(m)
    err = exc.value
    assert err.kind == "DtypeMismatch"
    assert err.path == "main/prim[add]"
    assert str(err) == err.trace
    assert err.trace == (
        "ERROR DtypeMismatch at main/prim[add]: "
        "operand dtypes differ: int32, float32"
    )


def test_inadmissible_and_shape_mismatch_kinds():
    m = module_of("(fn main ((x int16[])) (prim sqrt x))\n")
    with pytest.raises(IrTypeError) as exc:
        infer_types(m)
    assert exc.value.kind == "Inadmissible"
    assert "sqrt does not admit int16" in exc.value.message

    m = module_of(
        "(fn main ((a int8[2]) (b int8[3])) (prim add a b))\n"
    )
    with pytest.raises(IrTypeError) as exc:
        infer_types(m)
    assert exc.value.kind == "ShapeMismatch"


def test_operator_arity_mismatch_is_structured():
    m = module_of("(fn main ((x int32[])) (prim add x))\n")
    with pytest.raises(IrTypeError) as exc:
        infer_types(m)
    assert exc.value.kind == "ArityMismatch"
    assert exc.value.path == "main/prim[add]"


def test_error_path_descends_into_lets_and_args():
    m = module_of(
        "(fn main ((x int32[]))\n"
        "  (let bad (prim multiply x (prim sqrt (const int16[] 3)))\n"
        "  (tuple bad)))\n"
    )
    with pytest.raises(IrTypeError) as exc:
        infer_types(m)
    assert exc.value.path == "main/let[bad]/prim[multiply]/arg1/prim[sqrt]"


def test_call_checks_argument_types_exactly():
    helper = "(fn helper ((p int32[2])) (prim negative p))\n"
    ok = module_of(helper + "(fn main ((x int32[2])) (call (fnref helper) x))\n")
    assert infer_types(ok).main.ret == mir.TensorType(DType.INT32, (2,))

    wrong_dtype = module_of(
        helper + "(fn main ((x int64[2])) (call (fnref helper) x))\n"
    )
    with pytest.raises(IrTypeError) as exc:
        infer_types(wrong_dtype)
    assert exc.value.kind == "DtypeMismatch"
    assert exc.value.path == "main/call"

    # Broadcast-compatible is not enough: parameter types match exactly.
    wrong_shape = module_of(
        helper + "(fn main ((x int32[])) (call (fnref helper) x))\n"
    )
    with pytest.raises(IrTypeError) as exc:
        infer_types(wrong_shape)
    assert exc.value.kind == "ShapeMismatch"

    wrong_arity = module_of(
        helper + "(fn main ((x int32[2])) (call (fnref helper) x x))\n"
    )
    with pytest.raises(IrTypeError) as exc:
        infer_types(wrong_arity)
    assert exc.value.kind == "ArityMismatch"


def test_globals_resolve_regardless_of_declaration_order():
    # main is declared before the helper it calls.
    m = module_of(
        "(fn main ((x int32[])) (call (fnref late) x))\n"
        "(fn late ((p int32[])) (prim abs p))\n"
    )
    tm = infer_types(m)
    assert tm.main.ret == mir.TensorType(DType.INT32, ())
    assert list(tm.funcs) == ["main", "late"]


def test_closure_and_higher_order_call_types():
    m = module_of(
        "(fn pick () (fnref target))\n"
        "(fn target ((p float64[])) (prim exp p))\n"
        "(fn main ((x float64[]))\n"
        "  (call (call (fnref pick)) x))\n"
    )
    assert infer_types(m).main.ret == mir.TensorType(DType.FLOAT64, ())

    m = module_of(
        "(fn main ((x int8[3]))\n"
        "  (call (closure ((q int8[3])) (prim negative q)) x))\n"
    )
    assert infer_types(m).main.ret == mir.TensorType(DType.INT8, (3,))


def test_structural_problems_raise_value_error():
    cases = [
        "(fn main () (tuple loose))\n",  # unbound variable
        "(fn main () (fnref ghost))\n",  # unknown global
        "(fn main ((x int32[])) (proj x 0))\n",  # projecting a tensor
        "(fn main () (proj (tuple) 0))\n",  # projection out of range
        "(fn main ((x int32[])) (call x))\n",  # calling a tensor
        "(fn main () (call (fnref main)))\n",  # recursive global
    ]
    for text in cases:
        with pytest.raises(ValueError):
            infer_types(module_of(text))


def test_inference_is_idempotent():
    m = module_of(
        "(fn main ((x uint16[2])) (prim bitwise_and x (const uint16[] 9)))\n"
    )
    once = infer_types(m)
    twice = infer_types(once)
    assert mir.module_text(once) == mir.module_text(twice)
    assert once.main.ret == twice.main.ret
