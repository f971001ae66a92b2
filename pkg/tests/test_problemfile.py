import pytest

from boundsol.expr import evaluate
from boundsol.problemfile import ProblemFileError, load_problem_file, parse_problem_text
from boundsol.problems import CoupledSystemProblem, HamiltonianProblem, PdeProblem, ScalarProblem

SCALAR = """\
# cubic with cosine forcing
kind = scalar
a = 1
f = cos(t)   # |f| <= 1
M = 1
exact = 0
"""


def test_scalar_file(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text(SCALAR)
    p = load_problem_file(path)
    assert isinstance(p, ScalarProblem) and p.M == 1.0 and p.a0 == 1.0
    assert p.exact is not None


def test_hamiltonian_infers_m():
    p = parse_problem_text("kind = hamiltonian\na = 1\nV = z1^4 + z2^2\nf1 = exp(-t^2)\nf2 = 0\n"
                           "f0 = 1\nname = mine")
    assert isinstance(p, HamiltonianProblem) and p.m == 2 and p.name == "mine"
    assert p.f0 is not None


def test_system_and_pde():
    s = parse_problem_text("kind=system\na1e=1\na2e=1\nfe=x+x^3\nge=y+y^3\nh1=0.5\nh2=0.5\n"
                           "alpha=0")
    assert isinstance(s, CoupledSystemProblem) and s.alpha == 0.0
    q = parse_problem_text("kind=pde\nm=1\na=1\nV=z1^4\nf1=4")
    assert isinstance(q, PdeProblem) and evaluate(q.Vz[0], {"z1": 1.0}) == 4.0


def test_preset_reference():
    p = parse_problem_text("preset = example1\nname = ex1")
    assert isinstance(p, CoupledSystemProblem) and p.name == "ex1"


@pytest.mark.parametrize("text, line, fragment", [
    ("kind = scalar\na 1\n", 2, "key = value"),
    ("kind = scalar\na = 1\nf = cos(x)\n", 3, "uses x"),
    ("kind = pde\na = 1\nV = z1^2\nf1 = (\n", 4, "f1"),
    ("preset = nope\n", 1, "unknown preset"),
    ("kind = scalar\nf = 1\n", 2, "requires 'a'"),
    ("kind = scalar\na = 1\nf = 1\nM = abc\n", 4, "number"),
    ("kind = scalar\na = 1\na = 2\n", 3, "duplicate"),
    ("kind = blob\n", 1, "unknown kind"),
    ("preset = example1\na = 1\n", 2, "cannot be combined"),
    ("kind = scalar\na = 1\nf = 1\nV = z1\n", 4, "unexpected key"),
    ("a = 1\n", 1, "missing 'kind'"),
    ("kind = hamiltonian\nm = x\n", 2, "positive integer"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ProblemFileError) as info:
        parse_problem_text(text)
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"line {line}:")
