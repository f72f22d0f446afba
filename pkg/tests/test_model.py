"""Model grammar, validation rules, and covering-tree admissibility."""

import math
from fractions import Fraction

import pytest

from cuspflow import (
    DeltaTooSmall,
    DuplicateRay,
    ModelSyntaxError,
    QuotientModel,
    parse_model,
    rho_value,
    serialize_model,
    validate_model,
)
from cuspflow.model import (
    CompactSpec,
    RaySpec,
    admissible_successors,
    check_delta,
    model_graph,
    ray_graph,
)

from conftest import BRANCHY, RAY_Q2, RAY_Q2_DELTA, RAY_Q3, STAR_WEIGHTED, TWOSTATE


class TestParse:
    def test_minimal_ray(self):
        m = parse_model(RAY_Q2)
        assert m.q == 2
        assert m.delta is None
        assert m.is_lattice
        assert m.ray_ids == ("R1",)
        assert m.rays[0].attach == "V"
        assert m.is_point

    def test_delta_line(self):
        m = parse_model(RAY_Q2_DELTA)
        assert not m.is_lattice
        assert math.isclose(m.delta, 1.25 * math.log(2))
        assert math.isclose(m.rho, 2 ** (-1.5))

    def test_lattice_rho_is_exact(self):
        assert parse_model(RAY_Q2).rho == Fraction(1, 2)
        assert rho_value(3, None) == Fraction(1, 3)

    def test_comments_and_blank_lines(self):
        m = parse_model("# header\n\nq 2\n  # indented comment\nray R1 attach V\n")
        assert m.q == 2

    def test_fraction_probabilities(self):
        m = parse_model(TWOSTATE)
        assert m.compact.kind == "matrix"
        assert m.compact.trans[("A", "B")] == 1
        assert m.compact.entries[("R1", "A")] == 1

    def test_weighted_point_exits(self):
        m = parse_model(STAR_WEIGHTED)
        w = m.point_weights()
        assert w == {"R1": Fraction(2, 3), "R2": Fraction(1, 3)}

    def test_uniform_point_weights_default(self):
        m = parse_model("q 2\nray R1 attach V\nray R2 attach V\n")
        assert m.point_weights() == {"R1": Fraction(1, 2), "R2": Fraction(1, 2)}

    @pytest.mark.parametrize(
        "text",
        [
            "q 1\nray R1 attach V\n",
            "q 2\nwibble 3\n",
            "q 2\nray R1\n",
            "ray R1 attach V\n",  # q must come first
            "q 2\nray R1 attach V\ntrans A B 2\n",
        ],
    )
    def test_syntax_errors(self, text):
        with pytest.raises(ModelSyntaxError):
            parse_model(text)

    def test_duplicate_ray(self):
        with pytest.raises(DuplicateRay):
            parse_model("q 2\nray R1 attach V\nray R1 attach V\n")

    def test_delta_at_threshold_rejected(self):
        with pytest.raises(DeltaTooSmall):
            parse_model(f"q 2\ndelta {0.5 * math.log(2)}\nray R1 attach V\n")

    def test_check_delta_none_is_lattice(self):
        assert check_delta(2, None) == math.log(2)


class TestSerialize:
    @pytest.mark.parametrize(
        "text", [RAY_Q2, RAY_Q2_DELTA, STAR_WEIGHTED, TWOSTATE, BRANCHY]
    )
    def test_round_trip(self, text):
        m = parse_model(text)
        again = parse_model(serialize_model(m))
        assert again == m


class TestValidate:
    def test_fixture_models_clean(self, ray_q2, star_weighted, twostate, branchy):
        for m in (ray_q2, star_weighted, twostate, branchy):
            assert validate_model(m) == []

    def test_interior_up_index_must_be_one(self):
        m = QuotientModel(q=2, delta=None, rays=(RaySpec("R1", "V", up_index=2),))
        rules = {v.rule for v in validate_model(m)}
        assert "nagao_index" in rules

    def test_down_index_must_be_q(self):
        m = QuotientModel(q=2, delta=None, rays=(RaySpec("R1", "V", down_index=1),))
        rules = {v.rule for v in validate_model(m)}
        assert "nagao_index" in rules

    def test_non_stochastic_matrix_row(self):
        text = TWOSTATE.replace("trans A B 1\n", "trans A B 1/2\n")
        rules = {v.rule for v in validate_model(parse_model(text))}
        assert "stochasticity" in rules

    def test_entry_distribution_must_sum_to_one(self):
        text = TWOSTATE.replace("entry R1 A 1\n", "entry R1 A 1/3\n")
        assert validate_model(parse_model(text))


class TestAdmissibility:
    """Successor rule against the hand enumeration in the universal cover."""

    def test_one_ray_depth_three_enumeration(self, ray_q2):
        g = ray_graph(ray_q2, "R1", 3)
        expect = {
            "R1:u1": {"R1:u2", "R1:d1"},
            "R1:u2": {"R1:u3", "R1:d2"},
            "R1:d2": {"R1:d1"},
            "R1:d1": {"R1:u1"},
        }
        for lab, succ in expect.items():
            assert set(admissible_successors(g, lab)) == succ

    @pytest.mark.parametrize("text", [RAY_Q2, RAY_Q3, RAY_Q2_DELTA])
    def test_lift_count_identity(self, text):
        # from any directed edge of the cover there are exactly q
        # non-backtracking continuations; index(f) counts lifts of f and the
        # reversal loses exactly one lift to the backtrack
        m = parse_model(text)
        g = model_graph(m, 5)
        for lab in g.edges:
            kind = lab.split(":")[1]
            level = int(kind[1:])
            if kind.startswith("u") and level > 3:
                continue  # successors of deep up-edges fall outside the window
            rev = g.reverse[lab]
            total = sum(g.index[f] for f in admissible_successors(g, lab))
            if g.index[rev] > 1:
                total -= 1
            assert total == m.q, lab

    def test_reversal_blocked_only_at_index_one(self, ray_q2):
        g = ray_graph(ray_q2, "R1", 3)
        # descending continues down or bounces at the base (index q+1 > 1)
        assert "R1:u2" not in admissible_successors(g, "R1:d2")
        assert "R1:u1" in admissible_successors(g, "R1:d1")
