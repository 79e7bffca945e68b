"""Expression-level tensor IR: canonical text, type inference, lowering
from the graph form, optimization passes, metamorphic module mutators,
and three execution backends."""

from .backends import BACKENDS, ClosureValue, FuncRefValue, RunValue, run_module
from .infer import IrTypeError, infer_types
from .ir import (
    CallExpr,
    Closure,
    Const,
    Expr,
    FuncRef,
    FuncType,
    GlobalFunc,
    IrModule,
    Let,
    Param,
    Prim,
    Proj,
    TensorType,
    TupleExpr,
    TupleType,
    Type,
    Var,
    children,
    expr_size,
    expr_text,
    fresh_namer,
    func_text,
    module_text,
    parse_module,
    walk,
)
from .lower import lower
from .mutators import MUTATION_STRATEGIES, NoTarget, mutate
from .passes import (
    ALL_PASSES,
    PASS_NAMES,
    canonicalize,
    dead_code_elimination,
    eliminate_common_subexpr,
    fold_constant,
    inline,
    simplify_expr,
    to_a_normal_form,
)
from .toolchain import (
    BUG_CATALOG,
    BUG_NAMES,
    DEFAULT_PIPELINE,
    SeededBug,
    Toolchain,
    UnknownBug,
    apply_pipeline,
    default_toolchain,
    inject_bug,
)

__all__ = [
    "ALL_PASSES",
    "BUG_CATALOG",
    "BUG_NAMES",
    "DEFAULT_PIPELINE",
    "MUTATION_STRATEGIES",
    "NoTarget",
    "PASS_NAMES",
    "mutate",
    "SeededBug",
    "Toolchain",
    "UnknownBug",
    "apply_pipeline",
    "canonicalize",
    "dead_code_elimination",
    "default_toolchain",
    "eliminate_common_subexpr",
    "fold_constant",
    "inject_bug",
    "inline",
    "simplify_expr",
    "to_a_normal_form",
    "BACKENDS",
    "CallExpr",
    "Closure",
    "ClosureValue",
    "Const",
    "Expr",
    "FuncRef",
    "FuncRefValue",
    "FuncType",
    "GlobalFunc",
    "IrModule",
    "IrTypeError",
    "Let",
    "Param",
    "Prim",
    "Proj",
    "RunValue",
    "TensorType",
    "TupleExpr",
    "TupleType",
    "Type",
    "Var",
    "children",
    "expr_size",
    "expr_text",
    "fresh_namer",
    "func_text",
    "infer_types",
    "lower",
    "module_text",
    "parse_module",
    "run_module",
    "walk",
]
