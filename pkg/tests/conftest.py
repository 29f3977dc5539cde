import pytest

import bufprobe.cli
import bufprobe.experiment
from bufprobe import simulator
from bufprobe.model import BufferConfig, FlowSpec, RateProfile, build_schedule

SIMULATIONS_CHECKED = []


def checked_simulate(schedule, config, experiment_id=None):
    """simulate() followed by the full invariant check."""
    result = simulator.simulate(schedule, config, experiment_id)
    simulator.verify_invariants(result, config)
    SIMULATIONS_CHECKED.append(len(schedule))
    return result


@pytest.fixture(autouse=True)
def _check_every_simulation(monkeypatch):
    # Simulations started through the experiment/CLI layers are checked too.
    monkeypatch.setattr(bufprobe.experiment, "simulate", checked_simulate)
    monkeypatch.setattr(bufprobe.cli, "simulate", checked_simulate)


def run_sim(ul, ll, r_out, r_in, count, size=1500, unit="packets", profile=None, prop_us=0):
    cfg = BufferConfig(unit, ul, ll, profile or RateProfile.constant(r_out), prop_us)
    return checked_simulate(build_schedule(FlowSpec(size, r_in, count)), cfg), cfg


@pytest.fixture
def sim():
    return run_sim
