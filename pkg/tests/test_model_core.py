import pytest

from cassure import BindError, bind_constants, parse_model, type_check
from cassure.model import eval_expr, expand_formulas
from cassure.parsing import render_expr


MINI = """\
dtmc
const double p = 0.25;
const double q = 1 - p;
const int n = 3;
module m
  x : [0..3] init 0;
  [] x < n -> p : (x'=x+1) + q : (x'=x);
  [] x = n -> (x'=n);
endmodule
"""


def test_type_check_clean_on_case_study(model_ast):
    assert type_check(model_ast) == []


def test_constant_binding_defaults(bound):
    c = bound.constants
    assert c["p_rad_crit"] == 0.02
    assert c["p_rad_safe"] == pytest.approx(0.90)
    assert c["batt_dec"] == 20
    assert isinstance(c["batt_dec"], int)


def test_override_flows_into_derived_constants():
    ast = parse_model(MINI)
    b = bind_constants(ast, {"p": 0.5})
    assert b.constants["p"] == 0.5
    assert b.constants["q"] == 0.5


def test_int_override_rejects_fraction():
    ast = parse_model(MINI)
    with pytest.raises(BindError, match="int"):
        bind_constants(ast, {"n": 2.5})


def test_unknown_override_rejected():
    ast = parse_model(MINI)
    with pytest.raises(BindError, match="unknown"):
        bind_constants(ast, {"nope": 1})


def test_probabilities_must_sum_to_one():
    bad = MINI.replace("const double q = 1 - p;", "const double q = 0.5;")
    with pytest.raises(BindError, match="sum"):
        bind_constants(parse_model(bad))


def test_negative_probability_rejected():
    with pytest.raises(BindError):
        bind_constants(parse_model(MINI), {"p": 1.5})


def test_duplicate_variable_flagged():
    text = """\
dtmc
module a
  x : [0..1] init 0;
  [] x=0 -> (x'=1);
endmodule
module b
  x : [0..1] init 0;
  [] x=0 -> (x'=1);
endmodule
"""
    diags = type_check(parse_model(text))
    assert any("x" in d.message and d.severity == "error" for d in diags)


def test_assignment_to_foreign_variable_flagged():
    text = """\
dtmc
module a
  x : [0..1] init 0;
  [] x=0 -> (y'=1);
endmodule
module b
  y : [0..1] init 0;
  [] y=0 -> (y'=1);
endmodule
"""
    from cassure import ParseError
    with pytest.raises(ParseError):
        parse_model(text)


def test_cyclic_constants_rejected():
    text = "dtmc\nconst double a = b;\nconst double b = a;\n" \
           "module m\n  x : [0..1] init 0;\n  [] x=0 -> (x'=1);\nendmodule\n"
    with pytest.raises(BindError, match="cycl"):
        bind_constants(parse_model(text))


def test_eval_expr_with_formulas(bound):
    warn = next(f for f in bound.ast.formulas if f.name == "is_warning")
    assert eval_expr(warn.expr, {"rad": 1}, bound) is True
    assert eval_expr(warn.expr, {"rad": 0}, bound) is False


def test_expand_formulas_substitutes(bound):
    warn = next(f for f in bound.ast.formulas if f.name == "is_warning")
    import cassure.model as m
    e = m.Binary("&", m.Name("is_warning"), m.Name("sw"))
    expanded = expand_formulas(e, {"is_warning": warn.expr})
    assert "rad" in render_expr(expanded)
    assert "is_warning" not in render_expr(expanded)
