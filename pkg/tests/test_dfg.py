import pytest
from hypothesis import given, settings, strategies as st

from fxchain.dfg import (CycleError, DataFlowGraph, ParseError, allocate_chains, load,
                         minimal_formats, parse, render, topological_order)
from fxchain.fxformat import Format


def test_parse_fir(fir):
    assert fir.word_length == 16
    assert len(fir) == 20
    kinds = [n.kind for n in fir]
    assert kinds.count("input") == 10
    assert kinds.count("mul") == 5
    assert kinds.count("add") == 4
    assert kinds.count("output") == 1
    assert fir["n7"].operands == ("n6", "n3")
    assert fir["x0"].declared_format == Format(9, 0, 7)
    assert fir.warnings == []


def test_forward_references_allowed():
    g = parse("word 8\noutput y s\nnode s = add a b\ninput a 0/4/0\ninput b 0/4/0\n")
    assert [n.id for n in topological_order(g)] == ["a", "b", "s", "y"]


@pytest.mark.parametrize("text, needle, line", [
    ("word 16\ninput x 1/0/7\nnode n = add x a\noutput y n\n", 'unknown node reference "a"', 3),
    ("word 16\ninput x 1/0/7\ninput x 1/0/7\noutput y x\n", "duplicate id", 3),
    ("input x 1/0/7\noutput y x\n", "missing word directive", 1),
    ("word 8\nconst c 0.3 1/0/3\noutput y c\n", "not representable", 2),
    ("word 8\ninput x 1/0/3\n", "no output", None),
    ("word 8\ninput x 1/0/3\nnode n = div x x\noutput y n\n", "unknown operation", 3),
    ("word 8\ninput x 1/0/3\noutput y x\noutput z y\n", "another output", 4),
    ("word 8\nword 8\n", "duplicate word", 2),
    ("word 0\n", "positive integer", 1),
])
def test_parse_errors(text, needle, line):
    with pytest.raises(ParseError) as exc:
        parse(text)
    assert needle in str(exc.value)
    assert exc.value.line == line


def test_empty_file_is_missing_word(samples):
    with pytest.raises(ParseError, match="missing word directive"):
        load(samples / "empty.dfg")


def test_cycle_is_reported():
    text = "word 8\ninput x 1/0/3\nnode a = add x b\nnode b = add x a\noutput y b\n"
    with pytest.raises(ParseError, match="cycl"):
        parse(text)


def test_topological_order_raises_cycle_error():
    from fxchain.dfg import Node
    nodes = {
        "x": Node("x", "input", (), Format(1, 0, 3)),
        "a": Node("a", "add", ("x", "b")),
        "b": Node("b", "add", ("x", "a")),
    }
    with pytest.raises(CycleError):
        topological_order(DataFlowGraph(nodes, 8))


def test_dangling_node_warns():
    g = parse("word 8\ninput x 1/0/3\nnode n = add x x\noutput y x\n")
    assert any("never used" in w and "'n'" in w for w in g.warnings)


def test_fir_topological_order(fir):
    order = [n.id for n in topological_order(fir)]
    assert order[:10] == ["x0", "x1", "x2", "x3", "x4", "w0", "w1", "w2", "w3", "w4"]
    assert order[10:] == ["n1", "n2", "n3", "n4", "n5", "n6", "n7", "n8", "n9", "y"]


def test_topological_order_diamond():
    g = parse("word 8\ninput x 1/0/3\nnode b = mul x x\nnode a = add x x\n"
              "node d = add a b\noutput y d\n")
    order = [n.id for n in topological_order(g)]
    for n in g:
        for op in n.operands:
            assert order.index(op) < order.index(n.id)
    assert order == ["x", "b", "a", "d", "y"]


def test_minimal_formats_fir(fir):
    fmt = minimal_formats(fir)
    assert fmt["x0"] == Format(1, 0, 7)
    assert fmt["n1"] == Format(1, 0, 15)
    assert fmt["n9"] == Format(1, 4, 15)


def test_fir_chain(fir):
    chains = allocate_chains(fir)
    assert len(chains) == 1
    c = chains[0]
    assert c.members == ["n6", "n7", "n8", "n9"]
    assert c.base_N == 14
    assert c.external_operands == [("n1", "n2"), ("n3",), ("n4",), ("n5",)]
    assert c.overflow_steps() == [1, 2, 4]
    assert c.step_of("n8") == 3


def test_no_adds_no_chains(samples):
    assert allocate_chains(load(samples / "passthrough.dfg")) == []


def test_two_adds_feeding_mul_are_singletons():
    g = parse("word 16\ninput a 1/0/7\ninput b 1/0/7\ninput c 1/0/7\ninput d 1/0/7\n"
              "node s = add a b\nnode t = add c d\nnode m = mul s t\noutput y m\n")
    assert [c.members for c in allocate_chains(g)] == [["s"], ["t"]]


def test_fanout_breaks_chain():
    g = parse("word 16\ninput a 1/0/7\ninput b 1/0/7\ninput c 1/0/7\n"
              "node s = add a b\nnode t = add s c\nnode u = add s t\noutput y u\n")
    # s feeds two nodes, so it cannot continue into t; t mixes formats, so u stays alone
    assert [c.members for c in allocate_chains(g)] == [["s"], ["t"], ["u"]]


def test_heterogeneous_operand_breaks_chain():
    g = parse("word 32\ninput a 0/8/0\ninput b 0/8/0\ninput c 0/9/0\n"
              "node s = add a b\nnode t = add s c\noutput y t\n")
    chains = allocate_chains(g)
    # c is wider than the chain's operands; t restarts with (s, c), which agree
    assert [c.members for c in chains] == [["s"], ["t"]]
    assert chains[1].base_N == 8


def test_mixed_head_is_not_uniform():
    g = parse("word 32\ninput a 0/8/0\ninput b 0/9/0\ninput c 0/8/0\n"
              "node s = add a b\nnode t = add s c\noutput y t\n")
    chains = allocate_chains(g)
    assert [c.members for c in chains] == [["s"], ["t"]]
    assert not chains[0].uniform
    assert chains[0].overflow_steps() == [1]


def test_unsigned_sub_not_chainable():
    g = parse("word 32\ninput a 0/8/0\ninput b 0/8/0\ninput c 0/8/0\n"
              "node s = add a b\nnode t = sub s c\noutput y t\n")
    assert [c.members for c in allocate_chains(g)] == [["s"], ["t"]]


def test_signed_sub_chains():
    g = parse("word 32\ninput a 1/0/8\ninput b 1/0/8\ninput c 1/0/8\n"
              "node s = sub a b\nnode t = sub s c\noutput y t\n")
    assert [c.members for c in allocate_chains(g)] == [["s", "t"]]


def test_operand_order_does_not_matter():
    # two chain tails meeting at one add: the one whose chain accepts the other
    # operand's format is extended, whichever side of the add it is written on
    text = ("word 32\ninput a 0/4/0\ninput b 0/4/0\ninput c 0/5/0\ninput d 0/5/0\n"
            "node p = add a b\nnode q = add c d\nnode r = add {} {}\noutput y r\n")
    for ops in (("p", "q"), ("q", "p")):
        chains = allocate_chains(parse(text.format(*ops)))
        # p has format (0/5/0), which matches q's operands; q (0/6/0) does not match p's
        assert [c.members for c in chains] == [["p"], ["q", "r"]]


def test_accumulator_chain(samples):
    chains = allocate_chains(load(samples / "accumulator8.dfg"))
    assert len(chains) == 1
    assert chains[0].base_N == 7
    assert chains[0].overflow_steps() == [1, 2, 4, 8]


def test_render_round_trip(samples):
    for path in sorted(samples.glob("*.dfg")):
        if path.name == "empty.dfg":
            continue
        g = load(path)
        g2 = parse(render(g))
        assert g2.word_length == g.word_length
        assert list(g2.nodes) == list(g.nodes)
        for n in g:
            m = g2[n.id]
            assert (m.kind, m.operands, m.declared_format, m.const_value) == \
                   (n.kind, n.operands, n.declared_format, n.const_value)


@st.composite
def random_graphs(draw):
    n_inputs = draw(st.integers(1, 4))
    fmts = ["1/0/3", "0/4/0", "1/2/2"]
    lines = ["word 32"]
    ids = []
    for i in range(n_inputs):
        lines.append(f"input i{i} {draw(st.sampled_from(fmts))}")
        ids.append(f"i{i}")
    for k in range(draw(st.integers(1, 12))):
        op = draw(st.sampled_from(["add", "add", "add", "sub", "mul"]))
        a = draw(st.sampled_from(ids))
        b = draw(st.sampled_from(ids))
        lines.append(f"node n{k} = {op} {a} {b}")
        ids.append(f"n{k}")
    lines.append(f"output y {ids[-1]}")
    return parse("\n".join(lines))


@settings(max_examples=150, deadline=None)
@given(random_graphs())
def test_chains_partition_and_are_maximal(g):
    chains = allocate_chains(g)
    fmt = minimal_formats(g)
    fan = g.fanout()
    additive = [n.id for n in g if n.kind in ("add", "sub")]
    members = [m for c in chains for m in c.members]
    assert sorted(members) == sorted(additive)
    for c in chains:
        for prev, cur in zip(c.members, c.members[1:]):
            assert prev in g[cur].operands
            assert fan[prev] == 1
        if c.uniform:
            for ext in c.external_operands:
                for e in ext:
                    assert fmt[e].same_data(c.operand_format)
    # maximality: a uniform chain's tail never feeds (fanout 1) an add that starts
    # a new chain and whose other operand has the chain's format
    head_of = {c.members[0]: c for c in chains}
    for c in chains:
        if not c.uniform or fan[c.tail] != 1:
            continue
        for n in g:
            if n.kind in ("add", "sub") and c.tail in n.operands and n.id in head_of:
                other = [o for o in n.operands if o != c.tail]
                if not other:
                    continue
                ok_kind = n.kind == "add" or c.operand_format.signed
                assert not (ok_kind and fmt[other[0]].same_data(c.operand_format)), \
                    f"{n.id} could extend chain ending at {c.tail}"
