import numpy as np
import pandas as pd
import pytest

from core.errors import InputError, SpecError
from core.martingale_lab import (
    MartingaleSpec,
    estimate_sup_average,
    innovation_draws,
    llogl_conditional_mean,
    llogl_exponent_law,
    martingale_spec,
    sample_differences,
    sample_llogl,
    simulate_running_averages,
    sup_stabilization,
    write_trajectories,
)

SEEDS = list(range(20))


def test_spec_validation():
    with pytest.raises(SpecError):
        martingale_spec("pareto", p=3.0, shape=2.5)
    with pytest.raises(SpecError):
        martingale_spec("coin", p=1.0)
    with pytest.raises(InputError):
        martingale_spec("gaussian")
    assert martingale_spec("quantized_llogl").variant == "quantized_llogl"
    assert MartingaleSpec().name == "coin"


def test_zero_sequence():
    run = simulate_running_averages("zero", 1000, [0, 1])
    for traj in run.trajectories:
        assert np.all(traj.averages == 0.0)
        assert traj.sup_abs == 0.0


def test_running_averages_are_exact_partial_sums():
    spec = martingale_spec("pareto")
    run = simulate_running_averages(spec, 5000, [7], workers=1)
    z = sample_differences(spec, 5000, np.random.default_rng(7))
    expected = (np.cumsum(z) / np.arange(1, 5001))[run.grid - 1]
    assert np.array_equal(run.trajectories[0].averages, expected)


def test_coin_averages_vanish():
    run = simulate_running_averages("coin", 100_000, SEEDS, workers=4)
    assert all(abs(t.averages[-1]) <= 0.02 for t in run.trajectories)


def test_bounded_differences_bound_the_sup_estimate():
    for name in ("coin", "volatility_switch"):
        spec = martingale_spec(name)
        for p in (1.0, 2.0):
            est = estimate_sup_average(spec, 2000, range(10), p=p, workers=1)
            assert est.estimate <= spec.bound**p


def test_volatility_switch_is_conditionally_centered():
    spec = martingale_spec("volatility_switch")
    rng = np.random.default_rng(0)
    for previous in (-1.0, 1.5):
        draws = innovation_draws(spec, previous, 200_000, rng)
        se = draws.std() / np.sqrt(draws.size)
        assert abs(draws.mean()) <= 4 * se
    assert set(np.abs(innovation_draws(spec, 1.5, 100, rng))) == {1.5}
    assert set(np.abs(innovation_draws(spec, -1.0, 100, rng))) == {1.0}


def test_llogl_law_and_quantization():
    j, probs = llogl_exponent_law()
    assert probs.sum() == pytest.approx(1.0)
    assert np.all(np.diff(probs) < 0)
    spec = martingale_spec("quantized_llogl")
    x, y, levels = sample_llogl(spec, 50_000, np.random.default_rng(1))
    assert np.all(np.abs(y - x) <= 1.0)
    assert np.all(y <= x)
    assert levels[:5].tolist() == [1, 2, 3, 0, 1]


def test_llogl_centering_per_level():
    spec = martingale_spec("quantized_llogl")
    _, y, levels = sample_llogl(spec, 400_000, np.random.default_rng(2))
    j, probs = llogl_exponent_law()
    base = float(np.dot(probs, 2.0**j))
    for k in range(4):
        frac = y[levels == k] - np.floor(y[levels == k])
        expected = llogl_conditional_mean([k])[0] - base
        se = frac.std() / np.sqrt(frac.size)
        assert abs(frac.mean() - expected) <= 5 * se + 1e-12


def test_sup_stabilization_reports_every_n():
    stab = sup_stabilization("coin", [1000, 10_000], range(10), p=1.0, workers=1)
    assert [e.n_max for e in stab.estimates] == [1000, 10_000]
    assert len(stab.relative_changes) == 1
    # sup over a longer horizon can only grow
    assert stab.estimates[1].estimate >= stab.estimates[0].estimate


def test_standard_error_shrinks_with_more_seeds():
    small = estimate_sup_average("coin", 1000, range(100), p=1.0, workers=1)
    large = estimate_sup_average("coin", 1000, range(400), p=1.0, workers=1)
    assert large.stderr == pytest.approx(small.stderr / 2, rel=0.3)


def test_n_max_lower_bound():
    with pytest.raises(InputError):
        simulate_running_averages("coin", 50, [0])


def test_write_trajectories(tmp_path):
    run = simulate_running_averages("coin", 256, [0, 1], workers=1)
    path = write_trajectories(run, tmp_path / "traj.csv")
    df = pd.read_csv(path, dtype={"seed": str})
    assert list(df.columns) == ["n", "seed", "running_average"]
    assert len(df) == 2 * run.grid.size
    assert df[df["seed"] == "1"]["running_average"].tolist() == run.trajectories[1].averages.tolist()


def test_pareto_shape_follows_moment_order():
    heavy = martingale_spec("pareto", p=1.5)
    assert 1.5 < heavy.pareto_shape <= 2.0
    assert martingale_spec("pareto").pareto_shape == 2.5
    assert martingale_spec("pareto", p=1.5, shape=1.9).pareto_shape == 1.9
    z = sample_differences(heavy, 200_000, np.random.default_rng(6))
    tail = (1.0 + 10.0) ** -heavy.pareto_shape
    se = np.sqrt(tail * (1 - tail) / z.size)
    assert abs(np.mean(np.abs(z) > 10.0) - tail) <= 4 * se


@pytest.mark.slow
def test_acceptance_scale_martingale_runs():
    coin = simulate_running_averages("coin", 1_000_000, SEEDS)
    assert all(abs(t.averages[-1]) <= 0.01 for t in coin.trajectories)
    heavy = martingale_spec("pareto", p=1.5)
    assert heavy.pareto_shape <= 2.0
    pareto = simulate_running_averages(heavy, 1_000_000, SEEDS)
    finals = np.abs([t.averages[-1] for t in pareto.trajectories])
    assert np.median(finals) <= 0.02
    assert finals.max() <= 1.0
    stab = sup_stabilization("coin", [100_000, 1_000_000], SEEDS, p=1.0)
    assert stab.relative_changes[-1] < 0.05
