import pytest
from hypothesis import given, strategies as st

from conftest import SEQ_ARM, seq_arm
from persistprobe.litmus import (
    COUNTER, Barrier, BarrierKind, LitmusError, LitmusTest, LocationDecl, Persist, PersistKind,
    PostCondition, Sleep, UnsupportedShape, Write, expected_pattern, parse_litmus, render_litmus)

HEAD = "iterations = 10\n[locations]\nx size=8 ratio=1\ny size=8 ratio=2\n[thread 0]\n"


def test_sequential_file():
    t = seq_arm()
    assert len(t.threads) == 1 and len(t.threads[0]) == 6
    assert t.iterations == 2000
    assert t.names == ["x", "y"]
    assert t.location("y").ratio == 2 and t.location("x").size_bytes == 100
    assert t.threads[0][:3] == (Write("x", 1), Persist("x", PersistKind.CVAP),
                                Barrier(BarrierKind.DSB_SY))
    (imp,) = t.post_condition.implications
    assert str(imp) == "y==1 -> x==1"


def test_undeclared_location():
    with pytest.raises(LitmusError, match="undeclared location z") as e:
        parse_litmus(HEAD + "write x 1\nwrite z 1\n")
    assert e.value.line == 7


def test_undeclared_in_post():
    with pytest.raises(LitmusError, match="undeclared location q"):
        parse_litmus(HEAD + "write x 1\n[post]\nq==1 -> x==1\n")


def test_duplicate_ratio():
    text = "iterations=5\n[locations]\nx size=8 ratio=1\ny size=8 ratio=1\n[thread 0]\nwrite x 1\n"
    with pytest.raises(LitmusError, match="duplicate preamble ratio"):
        parse_litmus(text)


@pytest.mark.parametrize("text,msg", [
    (HEAD.replace("10", "0") + "write x 1\n", "zero iterations"),
    (HEAD, "at least one write"),
    ("iterations = 3\n[locations]\nx size=8 ratio=1\n", "at least one thread"),
    (HEAD + "write x 1\n[thread 2]\nwrite y 1\n", "expected \\[thread 1\\]"),
    (HEAD + "persist dccivac x\n", "unknown kind"),
    (HEAD + "write x\n", "syntax error"),
    (HEAD + "write x 1\nsleep -4\n", "non-negative"),
    (HEAD + "write x 18446744073709551616\n", "64-bit"),
    ("[locations]\nx size=8 ratio=1\n[thread 0]\nwrite x 1\n", "missing 'iterations"),
    ("iterations = 3\n[locations]\nx size=8\n[thread 0]\nwrite x 1\n", "size= and ratio="),
    ("iterations = 3\n[locations]\nx size=8 ratio=1\nx size=8 ratio=2\n[thread 0]\nwrite x 1\n",
     "duplicate location"),
    ("iterations = 3\nwrite x 1\n", "outside any section"),
    ("iterations = 3\n[bogus]\n", "unknown section"),
])
def test_errors(text, msg):
    with pytest.raises(LitmusError, match=msg):
        parse_litmus(text)


def test_location_named_like_keyword_parses():
    t = parse_litmus("iterations = 1\n[locations]\niterations_x size=8 ratio=1\n"
                     "[thread 0]\nwrite iterations_x 1\n")
    assert t.names == ["iterations_x"]


def test_comments_and_options():
    t = parse_litmus("# header\niterations = 4  # four\n[locations]\n"
                     "x size=100 ratio=3 aligned=no\n[thread 0]\nwrite x counter\nsleep 10\n")
    assert t.location("x").aligned is False
    assert t.threads[0][0].value == COUNTER and t.threads[0][0].value_at(3) == 3
    assert t.threads[0][1] == Sleep(10)


def test_constructor_validates():
    with pytest.raises(LitmusError):
        LitmusTest((LocationDecl("x", 8, 1),), ((Write("y", 1),),), 1)


def test_pattern_examples():
    assert expected_pattern(seq_arm()).tokens == ("x", "y")
    t = parse_litmus(HEAD + "write x 1\npersist cvap x\nbarrier dsb_sy\n")
    assert expected_pattern(t).tokens == ("x",)


@pytest.mark.parametrize("body", [
    "write x 1\nwrite y 1\npersist cvap y\nbarrier dsb_sy\n",
    "write x 1\npersist cvap y\nbarrier dsb_sy\nwrite y 1\npersist cvap y\nbarrier dsb_sy\n",
    "write x 1\nbarrier dsb_sy\npersist cvap x\nwrite y 1\npersist cvap y\nbarrier dsb_sy\n",
    "write x 1\npersist cvap x\nbarrier dsb_sy\nwrite y 1\npersist cvap y\n",
])
def test_pattern_not_persist_separated(body):
    with pytest.raises(UnsupportedShape, match="not persist-separated"):
        expected_pattern(parse_litmus(HEAD + body))


def test_pattern_rejects_multithread():
    t = parse_litmus(HEAD + "write x 1\npersist cvap x\nbarrier dsb_sy\n"
                            "[thread 1]\nwrite y 1\npersist cvap y\nbarrier dsb_sy\n")
    with pytest.raises(UnsupportedShape):
        expected_pattern(t)


def test_render_is_canonical():
    t = seq_arm()
    text = render_litmus(t)
    assert parse_litmus(text) == t
    assert render_litmus(parse_litmus(text)) == text
    with open(SEQ_ARM) as f:
        assert parse_litmus(f.read()) == t


name = st.sampled_from(["a", "b", "c", "loc_1"])
instr = st.one_of(
    st.builds(Write, name, st.one_of(st.integers(0, 2**64 - 1), st.just(COUNTER))),
    st.builds(Persist, name, st.sampled_from(list(PersistKind))),
    st.builds(Barrier, st.sampled_from(list(BarrierKind))),
    st.builds(Sleep, st.integers(0, 10**9)))


@st.composite
def litmus_tests(draw):
    locs = tuple(LocationDecl(n, draw(st.integers(1, 5000)), i + 1, draw(st.booleans()))
                 for i, n in enumerate(["a", "b", "c", "loc_1"]))
    threads = draw(st.lists(st.lists(instr, min_size=1, max_size=8), min_size=1, max_size=3))
    threads[0].insert(0, Write("a", 1))
    return LitmusTest(locs, tuple(tuple(t) for t in threads), draw(st.integers(1, 10**6)),
                      PostCondition(()))


@given(litmus_tests())
def test_roundtrip_property(t):
    assert parse_litmus(render_litmus(t)) == t
