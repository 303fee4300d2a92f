import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgesched.errors import ConfigError
from edgesched.workload import PRESETS, WorkloadSpec, describe_presets, generate, get_preset


def test_fifty_images_every_fifty_ms():
    tasks = generate(WorkloadSpec(50, 50, 1000))
    assert tasks[0].arrival == 0
    assert tasks[-1].arrival == 2_450_000
    assert [t.task_id for t in tasks] == list(range(1, 51))
    assert {t.origin for t in tasks} == {"rpi1"}
    assert {t.size_kb for t in tasks} == {29.0}


def test_single_image():
    (task,) = generate(WorkloadSpec(1, 50, 1000, start_ms=12.5))
    assert task.arrival == 12_500 and task.task_id == 1


def test_thousand_unique_ids():
    tasks = generate(WorkloadSpec(1000, 100, 1000))
    assert len({t.task_id for t in tasks}) == 1000


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(image_count=0, interval_ms=50, deadline_ms=1),
        dict(image_count=5, interval_ms=0, deadline_ms=1),
        dict(image_count=5, interval_ms=-1, deadline_ms=1),
        dict(image_count=5, interval_ms=50, deadline_ms=-1),
        dict(image_count=5, interval_ms=50, deadline_ms=1, image_size_kb=0),
        dict(image_count=5, interval_ms=50, deadline_ms=1, jitter_ms=50),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(ConfigError):
        WorkloadSpec(**kwargs)


def test_jitter_requires_rng():
    with pytest.raises(ConfigError):
        generate(WorkloadSpec(3, 50, 1, jitter_ms=10))


@given(st.integers(min_value=1, max_value=200), st.floats(min_value=1, max_value=500), st.floats(0, 0.99), st.integers())
def test_jitter_preserves_order(count, interval, frac, seed):
    spec = WorkloadSpec(count, interval, 1000, jitter_ms=interval * frac)
    arrivals = [t.arrival for t in generate(spec, random.Random(seed))]
    assert arrivals == sorted(arrivals)
    assert arrivals == [t.arrival for t in generate(spec, random.Random(seed))]


def test_presets_table():
    assert {n: (p.image_count, p.interval_ms) for n, p in PRESETS.items()} == {
        "fig5a": (50, 50), "fig5b": (50, 100), "fig5c": (50, 200), "fig5d": (50, 500),
        "fig6a": (1000, 50), "fig6b": (1000, 100), "fig8": (1000, 50),
    }
    assert get_preset("fig8").axis == "cpu_load"
    assert [v.label for v in get_preset("fig8").variants] == ["dds", "dds+worker"]
    assert len(describe_presets().splitlines()) == len(PRESETS)


def test_unknown_preset():
    with pytest.raises(ConfigError, match="fig5a"):
        get_preset("fig9")
