"""Excursion decomposition, cycle law, and the mean gap constant."""

from fractions import Fraction

import pytest

from cuspflow import (
    Compact,
    InadmissiblePath,
    RayDown,
    RayUp,
    build_chain,
    c_gamma_exact,
    cycle_law,
    decompose,
    expected_excursion_time,
    height_under_time_cap,
)


def u(i, r="R1"):
    return RayUp(r, i)


def d(i, r="R1"):
    return RayDown(r, i)


class TestDecompose:
    def test_single_excursion(self, ray_q2):
        trace = decompose([u(1), d(1)], ray_q2)
        (exc,) = trace.excursions
        assert exc.height == 1
        assert exc.start_time == 0
        assert exc.gap_before == 0
        assert exc.complete

    def test_two_excursions(self, ray_q2):
        trace = decompose([u(1), u(2), d(2), d(1), u(1), d(1)], ray_q2)
        heights = [e.height for e in trace.excursions]
        starts = [e.start_time for e in trace.excursions]
        assert heights == [2, 1]
        assert starts == [0, 4]

    def test_gap_counting(self, twostate):
        path = [u(1), d(1), Compact("B"), u(1), d(1)]
        trace = decompose(path, twostate)
        assert [e.gap_before for e in trace.excursions] == [0, 1]
        assert [e.start_time for e in trace.excursions] == [0, 3]

    def test_trailing_incomplete(self, ray_q2):
        trace = decompose([u(1), d(1), u(1), u(2)], ray_q2)
        last = trace.excursions[-1]
        assert not last.complete
        assert last.height == 2

    def test_leading_fragment_skipped(self, ray_q2):
        # a walk observed mid-descent: the opening partial excursion is not
        # counted, only the full one that follows
        trace = decompose([d(2), d(1), u(1), d(1)], ray_q2)
        assert len(trace.excursions) == 1
        assert trace.excursions[0].start_time == 2

    def test_inadmissible_step_raises(self, ray_q2):
        with pytest.raises(InadmissiblePath, match="step 1"):
            decompose([u(1), d(2)], ray_q2)

    def test_reconstruction_identity(self, twostate):
        path = [u(1), u(2), d(2), d(1), Compact("B"), u(1), d(1), Compact("B"), u(1), u(2)]
        trace = decompose(path, twostate)
        t = trace.excursions[0].start_time
        for prev, exc in zip(trace.excursions, trace.excursions[1:]):
            t += 2 * prev.height + exc.gap_before
            assert exc.start_time == t


class TestCycleLaw:
    def test_single_ray(self, ray_q2):
        assert cycle_law(build_chain(ray_q2)) == {"R1": 1}

    def test_uniform_star(self, star2):
        law = cycle_law(build_chain(star2))
        assert law == {"R1": Fraction(1, 2), "R2": Fraction(1, 2)}

    def test_weighted_star(self, star_weighted):
        law = cycle_law(build_chain(star_weighted))
        assert law == {"R1": Fraction(2, 3), "R2": Fraction(1, 3)}


class TestCGamma:
    def test_point_modes_are_zero(self, ray_q2, ray_q3, star2, star_weighted, ray_q2_delta):
        for model in (ray_q2, ray_q3, star2, star_weighted):
            assert c_gamma_exact(model) == 0
        assert c_gamma_exact(ray_q2_delta) == 0.0

    def test_deterministic_block(self, twostate):
        assert c_gamma_exact(twostate) == 1

    def test_branching_block(self, branchy):
        assert c_gamma_exact(branchy) == Fraction(5, 7)


class TestTimeHelpers:
    def test_height_under_time_cap(self):
        assert height_under_time_cap(5, 3) == 3
        assert height_under_time_cap(5, 8) == 5
        assert height_under_time_cap(1, 0) == 0

    def test_cap_rejects_negative(self):
        with pytest.raises(ValueError):
            height_under_time_cap(-1, 3)
        with pytest.raises(ValueError):
            height_under_time_cap(2, -1)

    def test_expected_excursion_time(self):
        assert expected_excursion_time(2, None) == 4
        assert expected_excursion_time(3, None) == 3
        # rho -> 0 forces every excursion to height 1, so time 2
        assert expected_excursion_time(2, 20.0) == pytest.approx(2.0, abs=1e-6)
