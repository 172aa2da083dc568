import math
import random

import numpy as np
import pytest

from ist.errors import (
    DomainMismatch,
    InvalidDistribution,
    RangeError,
    UnknownVariable,
    WorldTooLarge,
)
from ist.infotheory import (
    DiscreteJoint,
    apply_decoder,
    bayes_accuracy,
    bayes_decoder,
    chance_level,
    classify_privacy,
    constant_decoder,
    decoder_accuracy,
    dimension_channel_joint,
    entropy,
    identity_decoder,
    mutual_information,
    random_deterministic_decoder,
    tiil_check,
    verify_dpi,
)
from ist.worlds import build_world

H_THREE_QUARTERS = 0.8112781244591328  # -(0.75 log2 0.75 + 0.25 log2 0.25)


def joint2(table):
    return DiscreteJoint(("x", "y"), np.asarray(table, dtype=np.float64))


def random_joint(rng, names):
    shape = tuple(rng.randint(2, 4) for _ in names)
    table = np.array([rng.random() for _ in range(int(np.prod(shape)))])
    table /= table.sum()
    return DiscreteJoint(tuple(names), table.reshape(shape))


def test_entropy_examples():
    assert entropy([1.0, 0.0, 0.0]) == 0.0
    assert entropy([0.25] * 4) == 2.0
    assert entropy([0.75, 0.25]) == H_THREE_QUARTERS


def test_entropy_rejects_bad_input():
    with pytest.raises(InvalidDistribution):
        entropy([0.5, 0.6])
    with pytest.raises(InvalidDistribution):
        entropy([1.5, -0.5])


def test_entropy_of_joint():
    j = joint2([[0.25, 0.25], [0.25, 0.25]])
    assert entropy(j) == 2.0


def test_mi_independent_is_zero():
    px = np.array([0.3, 0.7])
    py = np.array([0.1, 0.2, 0.7])
    j = joint2(np.outer(px, py))
    assert mutual_information(j, "x", "y") == 0.0


def test_mi_copy_channel():
    j = joint2(np.eye(4) / 4)
    assert mutual_information(j, "x", "y") == 2.0


def test_mi_formula_cross_oracle():
    rng = random.Random(42)
    for _ in range(60):
        j = random_joint(rng, ("x", "y"))
        got = mutual_information(j, "x", "y")
        px = j.marginal("x").table
        py = j.marginal("y").table
        direct = 0.0
        for i in range(j.size("x")):
            for k in range(j.size("y")):
                p = j.table[i, k]
                if p > 0:
                    direct += p * math.log2(p / (px[i] * py[k]))
        assert abs(got - direct) < 1e-12


def test_mi_symmetry_and_bounds():
    rng = random.Random(7)
    for _ in range(40):
        j = random_joint(rng, ("x", "y"))
        a = mutual_information(j, "x", "y")
        b = mutual_information(j, "y", "x")
        assert abs(a - b) < 1e-12
        assert a >= 0.0
        hx = entropy(j.marginal("x"))
        hy = entropy(j.marginal("y"))
        assert a <= min(hx, hy) + 1e-9


def test_mi_group_arguments():
    rng = random.Random(3)
    j = random_joint(rng, ("a", "b", "c"))
    got = mutual_information(j, ("a", "b"), "c")
    assert got >= 0.0
    with pytest.raises(UnknownVariable):
        mutual_information(j, "a", "zzz")
    with pytest.raises(DomainMismatch):
        mutual_information(j, ("a", "b"), ("b", "c"))


def test_marginal_respects_requested_order():
    table = np.array([[0.1, 0.2, 0.3], [0.15, 0.05, 0.2]])
    j = joint2(table)
    yx = j.marginal("y", "x")
    assert yx.variables == ("y", "x")
    assert np.allclose(yx.table, table.T)


def test_joint_validation():
    with pytest.raises(InvalidDistribution):
        joint2([[0.6, 0.6], [0.0, 0.0]])
    with pytest.raises(InvalidDistribution):
        joint2([[1.2, -0.2], [0.0, 0.0]])
    with pytest.raises(InvalidDistribution):
        DiscreteJoint(("x", "x"), np.eye(2) / 2)


def test_cell_cap_enforced():
    with pytest.raises(WorldTooLarge):
        DiscreteJoint(("a", "b", "c"),
                      np.zeros((101, 100, 100)))


def test_decoder_validation():
    with pytest.raises(InvalidDistribution):
        from ist.infotheory import Decoder
        Decoder(("x",), "g", np.array([[0.5, 0.4], [0.5, 0.5]]))
    with pytest.raises(InvalidDistribution):
        from ist.infotheory import Decoder
        Decoder(("x",), "g", np.array([[1.5, -0.5], [0.5, 0.5]]))


def test_apply_identity_decoder_copies_evidence():
    j = joint2([[0.4, 0.1], [0.2, 0.3]])
    ext = apply_decoder(j, identity_decoder("y", 2))
    yg = ext.marginal("y", "g")
    assert np.allclose(yg.table, np.diag(j.marginal("y").table))


def test_apply_constant_decoder_kills_information():
    j = joint2([[0.4, 0.1], [0.2, 0.3]])
    ext = apply_decoder(j, constant_decoder(("y",), (2,), 2))
    assert mutual_information(ext, "x", "g") == 0.0


def test_bayes_decoder_on_copy_channel_recovers_everything():
    j = joint2(np.eye(4) / 4)
    dec = bayes_decoder(j, "x", "y")
    ext = apply_decoder(j, dec)
    assert abs(mutual_information(ext, "x", "g")
               - entropy(j.marginal("x"))) < 1e-12
    assert abs(decoder_accuracy(j, dec, "x") - 1.0) < 1e-12


def test_apply_decoder_domain_checks():
    j = joint2([[0.4, 0.1], [0.2, 0.3]])
    with pytest.raises(DomainMismatch):
        apply_decoder(j, identity_decoder("y", 3))  # size conflict
    with pytest.raises(DomainMismatch):
        apply_decoder(j, identity_decoder("y", 2, output_var="x"))


def test_dpi_random_suite_small():
    # the acceptance battery runs >= 100 joints; this is the quick loop
    rng = random.Random(17)
    for trial in range(30):
        names = ("v", "e1", "e2")[:rng.randint(2, 3)]
        j = random_joint(rng, names)
        ev = names[1:]
        sizes = tuple(j.size(n) for n in ev)
        out_size = j.size("v")
        decoders = [
            constant_decoder(ev, sizes, out_size),
            random_deterministic_decoder(ev, sizes, out_size, seed=trial),
            bayes_decoder(j, "v", ev),
        ]
        for dec in decoders:
            rep = verify_dpi(j, dec)
            assert rep.holds
            assert rep.slack >= -1e-9


def test_dpi_constant_decoder_report():
    j = joint2([[0.4, 0.1], [0.2, 0.3]])
    rep = verify_dpi(j, constant_decoder(("y",), (2,), 2))
    assert rep.i_v_g == 0.0
    assert rep.slack == rep.i_v_evidence
    with pytest.raises(DomainMismatch):
        verify_dpi(j, constant_decoder(("x", "y"), (2, 2), 2))


def test_bayes_accuracy_examples():
    assert bayes_accuracy(joint2(np.eye(4) / 4), "x", "y") == 1.0
    px = np.full(5, 0.2)
    py = np.array([0.5, 0.5])
    indep = DiscreteJoint(("x", "y"), np.outer(px, py))
    assert abs(bayes_accuracy(indep, "x", "y") - 0.2) < 1e-12
    assert chance_level(indep, "x") == 0.2


def test_bayes_accuracy_dominates_chance_and_decoders():
    rng = random.Random(29)
    for trial in range(30):
        j = random_joint(rng, ("v", "e"))
        acc = bayes_accuracy(j, "v", "e")
        assert acc >= chance_level(j, "v") - 1e-12
        dec = random_deterministic_decoder(("e",), (j.size("e"),),
                                           j.size("v"), seed=trial)
        assert decoder_accuracy(j, dec, "v") <= acc + 1e-12


def one_dim_world(lam, k, seed=4):
    cfg = {"tasks": [{"task_id": "t", "dims": [
        {"id": "d", "weight": 1.0, "K": k, "lambda": lam}]}]}
    return build_world(cfg, seed=seed)


def test_mixture_channel_bayes_accuracy():
    world = one_dim_world(0.5, 2)
    j = dimension_channel_joint(world, "t", "d", mode="sample")
    assert abs(bayes_accuracy(j, "v", "y") - 0.75) < 1e-12


def test_classify_point_mass_public():
    v = classify_privacy(one_dim_world(1.0, 10), "t", "d")
    assert v.label == "public"
    assert v.bayes_accuracy == 1.0


def test_classify_uniform_private():
    v = classify_privacy(one_dim_world(0.0, 10), "t", "d")
    assert v.label == "private"
    assert abs(v.bayes_accuracy - 0.1) < 1e-12
    assert abs(v.chance - 0.1) < 1e-12
    assert v.mi_bits <= 1e-12


def test_classify_mid_mixture():
    # acc = lam + (1 - lam)/K = 0.7 < 0.9
    v = classify_privacy(one_dim_world(0.6, 4), "t", "d", theta_pub=0.9)
    assert abs(v.bayes_accuracy - 0.7) < 1e-12
    assert v.label == "private"
    with pytest.raises(RangeError):
        classify_privacy(one_dim_world(0.6, 4), "t", "d", theta_pub=0.0)


def test_boundary_migration_single_flip():
    for k in (4, 10):
        for theta in (0.7, 0.9):
            labels = []
            accs = []
            for i in range(21):  # lam = 0.00, 0.05, ..., 1.00
                v = classify_privacy(one_dim_world(i / 20, k), "t", "d",
                                     theta_pub=theta)
                labels.append(v.label)
                accs.append(v.bayes_accuracy)
            assert all(b >= a - 1e-12 for a, b in zip(accs, accs[1:]))
            flips = sum(1 for a, b in zip(labels, labels[1:]) if a != b)
            assert flips == 1
            assert labels[0] == "private" and labels[-1] == "public"


def test_other_dimensions_cannot_rescue_private():
    for other_lam in (0.0, 0.5, 1.0):
        cfg = {"tasks": [{"task_id": "t", "dims": [
            {"id": "a", "weight": 0.5, "K": 4, "lambda": other_lam},
            {"id": "b", "weight": 0.5, "K": 10, "lambda": 0.0}]}]}
        world = build_world(cfg, seed=4)
        v = classify_privacy(world, "t", "b")
        assert v.label == "private"
        assert abs(v.bayes_accuracy - 0.1) < 1e-12


def test_channel_cap():
    with pytest.raises(WorldTooLarge):
        dimension_channel_joint(one_dim_world(0.0, 2000), "t", "d")


def test_tiil_check_demo_world(demo_world_config):
    world = build_world(demo_world_config)
    out = tiil_check(world, seed=0)
    assert out["all_hold"] is True
    assert out["theta_pub"] == 0.9
    by_dim = {(d["task_id"], d["dimension"]): d for d in out["dims"]}
    assert by_dim[("report-demo", "why")]["label"] == "private"
    assert by_dim[("report-demo", "what")]["label"] == "public"
    for entry in out["dims"]:
        for dec in entry["decoders"]:
            assert dec["dpi_holds"] and dec["ok"]
