import math

import numpy as np
import pytest

from core.errors import (
    BudgetError,
    CapabilityError,
    ConsistencyError,
    EnumerationRangeError,
    InputError,
    SearchError,
    SpecError,
)
from core.odometer import (
    AdversaryParams,
    OdometerSchedule,
    OdometerState,
    ak_bk,
    apply_T,
    brute_force_conditional_mean,
    build_adversarial_schedule,
    cycle_filter_mean,
    divergence_certificate,
    eval_f,
    f_value,
    f_values,
    locate_d_hit,
    membership,
    orbit_values,
    sample_odometer_path,
    special_time_mean,
    truncated_mean_u,
    truncated_mean_v,
    validate_schedule,
    window_conditional_means,
)
from core.schemes import LinearGrowthScheme, SampleMeanScheme, ZeroScheme


@pytest.mark.parametrize("k,expected", [(3, (1, 1)), (4, (1, 2)), (5, (2, 1)), (8, (2, 4)), (9, (3, 1))])
def test_ak_bk(k, expected):
    assert ak_bk(k) == expected


def test_schedule_parse_and_format():
    schedule = OdometerSchedule.parse("5, 9,15")
    assert schedule.ls == (5, 9, 15)
    assert str(schedule) == "5,9,15"
    assert schedule.K == 5
    assert schedule.L == 15
    assert schedule.truncated(4).ls == (5, 9)
    with pytest.raises(InputError):
        OdometerSchedule.parse("5,x")
    with pytest.raises(InputError):
        schedule.l(6)


def test_validate_schedule(small_schedule):
    assert validate_schedule(small_schedule) == []
    violations = validate_schedule(OdometerSchedule((5, 6)))
    assert [(v.kind, v.k, v.other_k) for v in violations] == [("separation", 3, 4)]
    assert [v.kind for v in validate_schedule(OdometerSchedule((1,)))] == ["positivity"]
    assert validate_schedule(OdometerSchedule(()))[0].kind == "empty"
    with pytest.raises(SpecError):
        divergence_certificate(OdometerSchedule((5, 6)), 3, seed=0)


def test_odometer_step_is_a_permutation_of_prefixes():
    L = 12
    images = set()
    for p in range(1 << L):
        state = OdometerState.from_bits([(p >> j) & 1 for j in range(L)])
        images.add(apply_T(state, 1).prefix(L))
        assert apply_T(state, 1).prefix(L) == (p + 1) % (1 << L)
    assert images == set(range(1 << L))


def test_semigroup_law():
    rng = np.random.default_rng(0)
    for seed in range(50):
        state = OdometerState.from_seed(seed)
        m, n = (int(v) for v in rng.integers(0, 5000, size=2))
        assert apply_T(apply_T(state, m), n).prefix(40) == apply_T(state, m + n).prefix(40)


def test_carry_reads_past_the_sampled_prefix():
    state = OdometerState.from_bits([1, 1, 1], seed=3)
    moved = apply_T(state, 1)
    assert moved.bits(3) == (0, 0, 0)
    assert moved.bit(4) == 1 - state.bit(4)
    assert moved.extended_to >= 4


def test_bits_do_not_depend_on_access_order():
    a = OdometerState.from_seed(9)
    b = OdometerState.from_seed(9)
    first = a.prefix(100)
    b.prefix(7)
    b.prefix(70)
    assert b.prefix(100) == first


def test_set_probabilities(small_schedule):
    n = 20_000
    states = [OdometerState.from_seed([1, i]) for i in range(n)]
    for k in small_schedule.ks:
        l, a = small_schedule.l(k), small_schedule.a(k)
        for set_id, prob in (("C", 2.0**-l), ("E", 2.0**-a), ("D", 2.0 ** -(l - 1))):
            if prob * n < 50:
                continue
            hits = sum(membership(s, set_id, k, small_schedule) for s in states)
            se = math.sqrt(prob * (1 - prob) / n)
            assert abs(hits / n - prob) <= 3 * se + 1.0 / n


def test_membership_rejects_unknown_k(small_schedule):
    with pytest.raises(InputError):
        membership(OdometerState.from_seed(0), "C", 6, small_schedule)


def test_d_is_a_subset_of_e_and_sets_are_disjoint(small_schedule):
    for p in range(1 << 15):
        state = OdometerState.from_bits([(p >> j) & 1 for j in range(15)])
        in_c = [k for k in small_schedule.ks if membership(state, "C", k, small_schedule)]
        in_d = [k for k in small_schedule.ks if membership(state, "D", k, small_schedule)]
        assert len(in_c) <= 1 and len(in_d) <= 1
        for k in in_d:
            assert membership(state, "E", k, small_schedule)


def test_e_sets_are_independent(small_schedule):
    n = 20_000
    states = [OdometerState.from_seed([2, i]) for i in range(n)]
    e = {k: np.array([membership(s, "E", k, small_schedule) for s in states]) for k in small_schedule.ks}
    for k, k2 in ((3, 4), (3, 5), (4, 5)):
        joint = 2.0 ** -(small_schedule.a(k) + small_schedule.a(k2))
        se = math.sqrt(joint * (1 - joint) / n)
        assert abs(np.mean(e[k] & e[k2]) - joint) <= 4 * se


def test_f_on_sets():
    schedule = OdometerSchedule((5, 9, 15))
    assert f_value(0b01111, schedule) == pytest.approx(32 / 3)
    assert f_value(0b11110, schedule) == 0.0
    path = sample_odometer_path(schedule, 5000, 0)
    allowed = {0.0} | {10.0 ** -k for k in schedule.ks} | {2.0 ** schedule.l(k) / 3.0 ** schedule.a(k) for k in schedule.ks}
    assert set(np.unique(path.values)) <= allowed


def test_f_values_matches_scalar(small_schedule):
    prefixes = np.arange(1 << 15)
    vectorized = f_values(prefixes, small_schedule)
    for p in (0, 15, 31, 255, 16383, 32767):
        assert vectorized[p] == f_value(p, small_schedule)
    assert eval_f(OdometerState.from_bits([1, 1, 1, 1, 0] + [0] * 10), small_schedule) == f_value(15, small_schedule)


def test_cycle_average_equals_truncated_means():
    schedule = OdometerSchedule((5, 9))
    average = f_values(np.arange(1 << schedule.L), schedule).mean()
    assert average == pytest.approx(truncated_mean_u(schedule) + truncated_mean_v(schedule), rel=1e-12)
    assert truncated_mean_v(schedule) == pytest.approx(2 / 3)


def test_sample_path_follows_the_orbit(small_schedule):
    path = sample_odometer_path(small_schedule, 100, 4)
    assert np.array_equal(path.values, orbit_values(path.omega, 100, small_schedule))
    assert path.omega == OdometerState.from_seed(4).prefix(15)


def test_enumeration_matches_cycle_filter():
    schedule = OdometerSchedule((5, 9))
    for seed in range(5):
        values = sample_odometer_path(schedule, 40, seed).values
        means = window_conditional_means(schedule, values)
        for n in (0, 1, 5, 17, 40):
            assert means[n] == pytest.approx(cycle_filter_mean(schedule, values[:n]), abs=1e-12)
        assert brute_force_conditional_mean(schedule, values[:17], m=17) == means[17]


def test_enumeration_rejects_impossible_window():
    schedule = OdometerSchedule((5, 9))
    with pytest.raises(ConsistencyError):
        window_conditional_means(schedule, [0.5])


def test_enumeration_cap():
    schedule = OdometerSchedule((5, 9, 40))
    with pytest.raises(EnumerationRangeError):
        window_conditional_means(schedule, [0.0])
    assert issubclass(EnumerationRangeError, CapabilityError)


def test_locate_d_hit(small_schedule):
    found = 0
    for seed in range(200):
        state = OdometerState.from_seed(seed)
        for k in small_schedule.ks:
            if not membership(state, "E", k, small_schedule):
                with pytest.raises(InputError):
                    locate_d_hit(state, k, small_schedule)
                continue
            found += 1
            i0 = locate_d_hit(state, k, small_schedule)
            l, a = small_schedule.l(k), small_schedule.a(k)
            assert 0 <= i0 < 2 ** (l - a - 1)
            assert membership(apply_T(state, i0), "D", k, small_schedule)
    assert found > 0


@pytest.mark.parametrize("k", [3, 4, 5])
def test_window_mean_at_special_time_has_closed_form(small_schedule, k):
    cert = divergence_certificate(small_schedule, k, seed=1)
    assert cert.window_mean == pytest.approx(cert.closed_form_mean, rel=1e-12)
    l, a = small_schedule.l(k), small_schedule.a(k)
    assert 0.5 * 2**l / 3**a * (1 - 1e-12) <= cert.window_mean <= 4 * 2**l / 3**a
    assert cert.closed_form_mean == pytest.approx(special_time_mean(small_schedule, k))


def test_certificates_against_bounds(small_schedule):
    c3 = divergence_certificate(small_schedule, 3, seed=0, slack=0.1)
    assert c3.bound == pytest.approx(2 / 9)
    assert c3.passed
    assert c3.horizon == 2 ** (5 - 1)
    assert c3.special_time == c3.i0 + 2 ** (5 - 2)
    fives = [divergence_certificate(small_schedule, 5, seed=s, slack=0.1) for s in range(8)]
    assert fives[0].bound == pytest.approx((4 / 3) ** 2 / 6)
    assert fives[0].bound > c3.bound
    # At a_k = 2 the special-time term alone, 2**(l-1) / 3**a / 2**(l-a), is below the bound.
    assert all(c.special_term < c.bound for c in fives)
    assert any(c.passed for c in fives)


@pytest.mark.parametrize("k", [3, 4, 5])
def test_exact_bound_always_holds(small_schedule, k):
    for seed in range(6):
        cert = divergence_certificate(small_schedule, k, seed=seed)
        assert cert.exact_passed
        assert cert.exact_bound == pytest.approx(cert.special_term, abs=1e-12 * cert.closed_form_mean)
        assert cert.cesaro_value >= cert.special_term


def test_certificate_retry_budget(small_schedule):
    with pytest.raises(SearchError):
        divergence_certificate(small_schedule, 3, seed=0, retry_budget=0)


def test_certificate_against_scheme_uses_truncated_schedule(small_schedule):
    cert = divergence_certificate(small_schedule, 3, seed=2, scheme=ZeroScheme())
    assert cert.reference == "zero"
    assert cert.closed_form_mean == pytest.approx(special_time_mean(small_schedule.truncated(3), 3))


def test_adversary_against_zero_scheme():
    params = AdversaryParams(k_max=4, n_seeds=20, horizon=512)
    schedule = build_adversarial_schedule(ZeroScheme(), params)
    assert schedule.ls[0] == 5
    assert validate_schedule(schedule) == []
    assert schedule.l(4) - schedule.a(4) > 10 * schedule.l(3)
    assert len(schedule.thresholds) == 2


def test_adversary_against_sample_mean_certifies_first_stage():
    scheme = SampleMeanScheme()
    schedule = build_adversarial_schedule(scheme, AdversaryParams(k_max=5, n_seeds=40, horizon=1024))
    assert schedule.K == 5
    n_k = schedule.thresholds[0]
    assert 2 ** (schedule.l(3) - schedule.a(3)) > 10 * n_k
    cert = divergence_certificate(schedule, 3, seed=0, scheme=scheme)
    assert cert.passed


def test_adversary_gives_up_on_unbounded_scheme():
    with pytest.raises(BudgetError):
        build_adversarial_schedule(LinearGrowthScheme(), AdversaryParams(k_max=3, n_seeds=5, horizon=256))


def _random_prefixes(n, L, seed):
    return np.random.default_rng(seed).integers(0, 1 << L, size=n, dtype=np.int64)


def _mean_within(samples, expected, n_se=3.0):
    se = samples.std() / math.sqrt(samples.size)
    return abs(samples.mean() - expected) <= n_se * se


def test_monte_carlo_mean_of_f():
    schedule = OdometerSchedule((5, 9))
    values = f_values(_random_prefixes(200_000, schedule.L, 31), schedule)
    assert _mean_within(values, truncated_mean_u(schedule) + truncated_mean_v(schedule))


@pytest.mark.slow
def test_monte_carlo_mean_of_v_at_a_million_points(small_schedule):
    values = f_values(_random_prefixes(1_000_000, small_schedule.L, 32), small_schedule)
    assert truncated_mean_v(small_schedule) == pytest.approx(1 / 3 + 1 / 3 + 1 / 9)
    assert _mean_within(values, truncated_mean_u(small_schedule) + truncated_mean_v(small_schedule))


def _bits_set(prefixes, lo, hi):
    # omega_i = 1 for lo <= i < hi, 1-indexed bits stored low to high
    mask = ((1 << (hi - 1)) - 1) ^ ((1 << (lo - 1)) - 1)
    return (prefixes & mask) == mask


def _bit_clear(prefixes, i):
    return ((prefixes >> (i - 1)) & 1) == 0


@pytest.mark.slow
def test_set_probabilities_at_a_million_points(small_schedule):
    n = 1_000_000
    P = _random_prefixes(n, small_schedule.L, 33)
    for k in small_schedule.ks:
        l, a = small_schedule.l(k), small_schedule.a(k)
        c = _bits_set(P, 1, l) & _bit_clear(P, l)
        e = _bit_clear(P, l - a) & _bits_set(P, l - a + 1, l)
        for hits, prob in ((c, 2.0**-l), (e, 2.0**-a)):
            se = math.sqrt(prob * (1 - prob) / n)
            assert abs(hits.mean() - prob) <= 3 * se
    sample = [OdometerState.from_bits([(int(p) >> j) & 1 for j in range(small_schedule.L)]) for p in P[:2000]]
    for k in small_schedule.ks:
        l, a = small_schedule.l(k), small_schedule.a(k)
        expected = _bit_clear(P[:2000], l - a) & _bits_set(P[:2000], l - a + 1, l)
        assert [membership(s, "E", k, small_schedule) for s in sample] == expected.tolist()


@pytest.mark.slow
def test_e_sets_are_independent_at_a_million_points(small_schedule):
    n = 1_000_000
    P = _random_prefixes(n, small_schedule.L, 34)
    e = {}
    for k in small_schedule.ks:
        l, a = small_schedule.l(k), small_schedule.a(k)
        e[k] = _bit_clear(P, l - a) & _bits_set(P, l - a + 1, l)
    for k, k2 in ((3, 4), (3, 5), (4, 5)):
        joint = np.mean(e[k] & e[k2])
        product = np.mean(e[k]) * np.mean(e[k2])
        se = math.sqrt(product * (1 - product) / n)
        assert abs(joint - product) <= 3 * se
        assert abs(joint - 2.0 ** -(small_schedule.a(k) + small_schedule.a(k2))) <= 3 * se
