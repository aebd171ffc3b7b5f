import math

import pytest

import captree


def test_binary_leaves_capacity():
    t = captree.Tree.homogeneous(2, 3)
    assert t.size == 15
    # unit weights, p = 2: leaf 1, then c -> 2c / (1 + 2c) upward, root adds its own unit resistance
    c = 1.0
    for _ in range(3):
        s = 2 * c
        c = s / (1 + s)
    assert captree.capacity(t, t.leaves(), 2.0) == pytest.approx(c, rel=1e-12)


def test_spec_matches_cli_example():
    t = captree.Tree.from_spec("binary:2:3")
    assert round(captree.capacity(t, t.leaves(), 2.0), 12) == 0.533333333333
    code, out, _ = captree.run_cli(["cap", "--tree", "binary:2:3", "--format", "csv"])
    assert code == 0
    assert out.strip().endswith("0.533333333333")


def test_point_capacity_is_d_pi_power():
    t = captree.Tree.chain(4, 1.0, 0.5)
    leaf = t.leaves()[0]
    p = 3.0
    assert captree.capacity_point(t, leaf, p) == pytest.approx(captree.d_pi(t, leaf, p) ** (1 - p))


def test_oracles_agree():
    t = captree.Tree.homogeneous(3, 3)
    E = t.nodes_at_depth(2)[:4]
    exact = captree.capacity(t, E, 2.0)
    assert captree.quadratic_oracle(t, E) == pytest.approx(exact, rel=1e-10)
    assert captree.primal_oracle(t, E, 2.0)["value"] == pytest.approx(exact, rel=1e-6)
    assert captree.dual_oracle(t, E, 2.0)["value"] == pytest.approx(exact, rel=1e-6)


def test_equilibrium_fields():
    t = captree.Tree.homogeneous(2, 4)
    eq = captree.equilibrium(t, t.leaves(), 2.5)
    assert len(eq["phi"]) == t.size
    assert eq["measure"][0] == pytest.approx(eq["capacity"])
    assert eq["max_constraint_error"] < 1e-12
    energy = captree.energy(t, {v: eq["measure"][v] for v in t.leaves()}, 2.5)
    assert energy == pytest.approx(eq["capacity"], rel=1e-10)


def test_bad_input_raises_value_error():
    t = captree.Tree.homogeneous(2, 2)
    with pytest.raises(ValueError):
        captree.capacity(t, [0, 1], 2.0)
    with pytest.raises(ValueError):
        captree.capacity(t, t.leaves(), 1.0)
    with pytest.raises(ValueError):
        captree.Tree.from_spec("missing.tree")


def test_space_discretization():
    sp = captree.make_space("interval", 6)
    assert sp.dim == 1 and sp.delta == 0.5
    cells = captree.discretize(sp, "interval 0 0.25", 4)
    assert len(cells) == 4
    lo, hi = sp.cell(cells[0])
    assert lo == [0.0] and hi == [0.0625]
    tree = captree.weight_pi_s(sp, 0.5, 2.0)
    assert captree.capacity(tree, cells, 2.0) > 0
    est = captree.ball_capacity_estimate(sp, 0.25, 0.5, 2.0)
    assert est["log_case"]


def test_checks_and_selftest():
    t = captree.Tree.homogeneous(2, 5)
    r = captree.check_cmcap(t, t.leaves(), 2.0, samples=10, seed=4)
    assert r["pass"] and r["bound"] == pytest.approx(2.0)
    assert captree.check_maximal(t, 2.0, samples=5)["pass"]
    assert captree.check_shadow(t, t.leaves(), 2.0)["pass"]
    res = captree.selftest([3])
    assert len(res) == 1 and res[0]["pass"]


def test_tree_round_trip():
    t = captree.Tree.homogeneous(2, 2, 1.0, 0.5)
    back = captree.Tree.parse(t.serialize())
    assert back.weights == t.weights
    assert math.isclose(captree.conjugate_exponent(3.0), 1.5)
