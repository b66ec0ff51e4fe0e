import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehcog import CrossSnr, LinkBudget, PowerMode, build_profile
from ehcog.outage import success_prob_concurrent, success_prob_solo, transmission_rate

from oracles import mc_success_concurrent, mc_success_solo

# ranges where neither the full-slot nor the post-sensing exponent underflows:
# worst case rate 1.2/(1-0.6) = 3 gives threshold 7 and exponent 7/0.25 = 28,
# so strict inequalities between the variants stay meaningful in float
links = st.builds(
    LinkBudget,
    bits_per_packet=st.floats(0.1, 1.2),
    slot_duration=st.just(1.0),
    sensing_duration=st.floats(0.05, 0.6),
    bandwidth=st.just(1.0),
    mean_snr=st.floats(0.5, 50.0),
    fading_mean=st.floats(0.5, 2.0),
)
modes = st.sampled_from([PowerMode.FIXED_POWER, PowerMode.FIXED_ENERGY])


def test_unit_rate_link():
    link = LinkBudget(1.0, 1.0, 0.0, 1.0, mean_snr=2.0)
    assert transmission_rate(link, 0) == 1.0
    assert success_prob_solo(link, 0) == pytest.approx(math.exp(-0.5), abs=1e-12)
    # interferer at the same mean snr halves the odds at threshold 1
    assert success_prob_concurrent(link, 2.0, 0) == pytest.approx(
        math.exp(-0.5) / 2.0, abs=1e-12
    )


def test_zero_size_packet_always_succeeds():
    link = LinkBudget(0.0, 1.0, 0.3, mean_snr=0.7)
    for i in (0, 1):
        assert success_prob_solo(link, i) == 1.0
        assert success_prob_concurrent(link, 5.0, i) == 1.0


def test_no_sensing_time_makes_stages_equal():
    link = LinkBudget(2.0, 1.0, 0.0, mean_snr=3.0)
    for mode in PowerMode:
        assert success_prob_solo(link, 0, mode) == success_prob_solo(link, 1, mode)
        assert success_prob_concurrent(link, 1.0, 0, mode) == success_prob_concurrent(
            link, 1.0, 1, mode
        )


def test_stage_argument_validated():
    link = LinkBudget(1.0, 1.0)
    with pytest.raises(ValueError):
        success_prob_solo(link, 2)
    with pytest.raises(ValueError):
        success_prob_concurrent(link, 1.0, -1)
    with pytest.raises(ValueError):
        success_prob_concurrent(link, -0.5, 0)


@given(links, modes)
def test_post_sensing_success_strictly_below_full_slot(link, mode):
    assert success_prob_solo(link, 1, mode) < success_prob_solo(link, 0, mode)


@given(links, modes, st.floats(0.1, 20.0))
def test_interference_strictly_hurts(link, mode, inr):
    for i in (0, 1):
        assert success_prob_concurrent(link, inr, i, mode) < success_prob_solo(
            link, i, mode
        )
    assert success_prob_concurrent(link, 0.0, 0, mode) == success_prob_solo(
        link, 0, mode
    )


@given(links, modes, st.floats(1.1, 4.0))
def test_success_monotone_in_mean_snr(link, mode, boost):
    import dataclasses

    better = dataclasses.replace(link, mean_snr=link.mean_snr * boost)
    for i in (0, 1):
        assert success_prob_solo(better, i, mode) > success_prob_solo(link, i, mode)


@given(links)
def test_fixed_energy_beats_fixed_power_after_sensing(link):
    # boosting power over the shortened transmission can only help
    assert success_prob_solo(link, 1, PowerMode.FIXED_ENERGY) >= success_prob_solo(
        link, 1, PowerMode.FIXED_POWER
    )


@given(links, links, st.floats(0.0, 10.0), st.floats(0.0, 10.0), modes)
@settings(max_examples=50)
def test_build_profile_satisfies_ordering_invariants(pri, sec, c1, c2, mode):
    # constructor re-checks conc <= solo and short <= full; just build it
    build_profile(pri, sec, CrossSnr(c1, c2), mode)


def test_solo_success_matches_simulation():
    rng = np.random.default_rng(7)
    for link, mode in [
        (LinkBudget(1.0, 1.0, 0.1, mean_snr=2.0), PowerMode.FIXED_ENERGY),
        (LinkBudget(0.8, 1.0, 0.3, mean_snr=1.0, fading_mean=2.0), PowerMode.FIXED_POWER),
    ]:
        for i in (0, 1):
            p_hat, se = mc_success_solo(link, i, mode, 200_000, rng)
            assert abs(p_hat - success_prob_solo(link, i, mode)) < 4.5 * se


def test_concurrent_success_matches_simulation():
    rng = np.random.default_rng(11)
    link = LinkBudget(1.0, 1.0, 0.1, mean_snr=2.0)
    for inr in (0.5, 2.0):
        for i in (0, 1):
            p_hat, se = mc_success_concurrent(
                link, inr, i, PowerMode.FIXED_ENERGY, 200_000, rng
            )
            assert abs(p_hat - success_prob_concurrent(link, inr, i)) < 4.5 * se
