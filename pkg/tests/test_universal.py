import pytest

from attrfool.attack import Edit, PerturbationRecord
from attrfool.universal import (
    PolicyError,
    PolicyRow,
    SemiUniversalPolicy,
    apply_policy,
    build_policy,
    format_count,
    load_policy,
    parse_count,
    save_policy,
    split_attack_eval,
)


def _rec(edits, sample_id=0):
    return PerturbationRecord(
        sample_id=sample_id,
        edits=tuple(Edit(p, o, n) for p, o, n in edits),
        rho=0.1,
        distance=0.2,
        pcc=0.6,
        label=0,
    )


def test_count_text_round_trips():
    for value in (0, 7, 139, 999, 1000, 2900, 10900, 72800, 131000, 146000, 430000, 1010):
        assert parse_count(format_count(value)) == value
    assert format_count(146000) == "146k"
    assert format_count(72800) == "72.8k"
    assert format_count(139) == "139"
    assert parse_count("146k") == 146000
    with pytest.raises(PolicyError):
        parse_count("many")


def test_build_policy_hand_enumerated():
    records = [
        _rec([(0, "movie", "cinematographic")], 0),
        _rec([(2, "movie", "cinematographic"), (4, "good", "decent")], 1),
        _rec([(1, "movie", "cinematographic")], 2),
        _rec([(3, "movie", "film"), (5, "good", "decent")], 3),
    ]
    policy = build_policy(records)
    assert [(r.token, r.count, r.replacement) for r in policy.rows] == [
        ("movie", 4, "cinematographic"),
        ("good", 2, "decent"),
    ]


def test_build_policy_empty():
    assert len(build_policy([])) == 0


def test_build_policy_permutation_invariant():
    records = [
        _rec([(0, "a1", "b1")], 0),
        _rec([(1, "a2", "b2"), (2, "a1", "b3")], 1),
        _rec([(0, "a1", "b1")], 2),
    ]
    forward = build_policy(records)
    backward = build_policy(list(reversed(records)))
    assert forward == backward


def test_build_policy_modal_tie_lexicographic():
    records = [_rec([(0, "w", "zeta")], 0), _rec([(0, "w", "alpha")], 1)]
    policy = build_policy(records)
    assert policy.rows[0].replacement == "alpha"


def test_build_policy_count_tie_orders_tokens():
    records = [_rec([(0, "zz", "a")], 0), _rec([(0, "aa", "b")], 1)]
    policy = build_policy(records)
    assert [r.token for r in policy.rows] == ["aa", "zz"]


def test_policy_invariants_enforced():
    with pytest.raises(PolicyError):
        SemiUniversalPolicy((PolicyRow("a", "1", "a"),))
    with pytest.raises(PolicyError):
        SemiUniversalPolicy((PolicyRow("a", "1", "b"), PolicyRow("a", "2", "c")))
    with pytest.raises(PolicyError):
        SemiUniversalPolicy((PolicyRow("a", "1", "b"), PolicyRow("c", "2", "d")))


def test_apply_policy_hand_example():
    policy = SemiUniversalPolicy(
        (PolicyRow("movie", "4", "cinematographic"), PolicyRow("good", "2", "decent"))
    )
    rec = apply_policy(("movie", "movie", "good"), policy, rho_max=0.67)
    assert rec.replacements == 2
    assert rec.apply(("movie", "movie", "good")) == (
        "cinematographic", "cinematographic", "good",
    )


def test_apply_policy_empty_policy_and_zero_budget():
    policy = SemiUniversalPolicy(())
    rec = apply_policy(("movie", "good"), policy, rho_max=1.0)
    assert rec.replacements == 0
    policy = SemiUniversalPolicy((PolicyRow("movie", "1", "film"),))
    rec = apply_policy(("movie", "good"), policy, rho_max=0.4)  # budget 0
    assert rec.replacements == 0


def test_apply_policy_stops_at_budget_mid_row():
    policy = SemiUniversalPolicy((PolicyRow("x", "9", "y"),))
    tokens = ("x", "x", "x", "x")
    rec = apply_policy(tokens, policy, rho_max=0.5)
    assert rec.replacements == 2
    assert [e.position for e in rec.edits] == [0, 1]  # left to right


def test_apply_policy_never_rematches_replaced_positions():
    # row 1 rewrites x -> y; a later y row must not touch those positions
    policy = SemiUniversalPolicy((PolicyRow("x", "3", "y"), PolicyRow("y", "1", "z")))
    tokens = ("x", "y")
    rec = apply_policy(tokens, policy, rho_max=1.0)
    assert rec.apply(tokens) == ("y", "z")


def test_apply_policy_single_pass_own_token():
    records = [_rec([(0, "movie", "film")], 0)]
    policy = build_policy(records)
    rec = apply_policy(("movie", "night"), policy, rho_max=0.5)
    assert rec.apply(("movie", "night")) == ("film", "night")


def test_policy_built_from_sample_hits_its_frequent_token():
    # a policy distilled from a sample's own records replaces that sample's
    # most frequently recorded token whenever the budget allows it
    tokens = ("movie", "good", "movie", "plot")
    records = [
        _rec([(0, "movie", "film"), (1, "good", "fine")], 0),
        _rec([(2, "movie", "film")], 0),
    ]
    policy = build_policy(records)
    rec = apply_policy(tokens, policy, rho_max=0.25)  # budget 1
    assert rec.edits[0].old == "movie"


def test_policy_csv_round_trip_bit_exact(tmp_path):
    path = tmp_path / "policy.csv"
    content = (
        "token,count,replacement\n"
        "reuters,146k,goldman\n"
        "said,131k,avowed\n"
        "workers,10.9k,labourers\n"
        "zone,2.9k,field\n"
    )
    path.write_text(content, encoding="utf-8")
    policy = load_policy(path)
    assert policy.rows[0].count == 146000
    out = tmp_path / "copy.csv"
    save_policy(policy, out)
    assert out.read_bytes() == path.read_bytes()


def test_policy_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "policy.csv"
    path.write_text("word,n,sub\n", encoding="utf-8")
    with pytest.raises(PolicyError):
        load_policy(path)


def test_built_policy_survives_save_load_save(tmp_path):
    records = [_rec([(0, "movie", "film"), (1, "good", "decent")], i) for i in range(3)]
    policy = build_policy(records)
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    save_policy(policy, p1)
    save_policy(load_policy(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_split_attack_eval_partitions():
    attack, evaluation = split_attack_eval(11, seed=3)
    assert len(attack) == 6 and len(evaluation) == 5  # odd extra goes to attack
    assert sorted(attack + evaluation) == list(range(11))
    again = split_attack_eval(11, seed=3)
    assert (attack, evaluation) == again
    assert split_attack_eval(11, seed=4) != (attack, evaluation)
