import numpy as np
import pytest

from basisdiff.bases import pixel_basis
from basisdiff.denoisers import ConstantDenoiser
from basisdiff.fields import Field
from basisdiff.process import DiffusionProcess
from basisdiff.samplers import (TERMINAL_FRACTION, euler_trajectory,
                                make_time_grid, sample_euler,
                                sample_reference, write_trajectory_csv)
from basisdiff.schedules import make_vp_schedule


def _process(d=2):
    return DiffusionProcess(make_vp_schedule(), pixel_basis((d,)), 0.0)


def test_uniform_grid_knots():
    grid = make_time_grid(100.0, 5)
    assert grid[0] == 100.0 and grid[-1] == pytest.approx(0.1, rel=1e-15)
    assert np.allclose(grid, [100.0, 80.02, 60.04, 40.06, 20.08, 0.1],
                       rtol=1e-12)
    assert np.array_equal(make_time_grid(100.0, 1),
                          np.linspace(100.0, 0.1, 2))


def test_quadratic_grid_shape():
    grid = make_time_grid(100.0, 8, scheme="quadratic")
    assert grid.size == 9
    assert grid[0] == pytest.approx(100.0, rel=1e-15)
    assert grid[-1] == pytest.approx(0.1, rel=1e-15)
    assert np.all(np.diff(grid) < 0)
    u = np.linspace(1.0, 0.0, 9)
    assert np.allclose(grid, 0.1 + 99.9 * u * u, rtol=1e-12)
    # quadratic spacing concentrates knots near the terminal time
    assert grid[-2] - grid[-1] < grid[0] - grid[1]


def test_grid_argument_errors():
    with pytest.raises(ValueError):
        make_time_grid(100.0, 0)
    with pytest.raises(ValueError):
        make_time_grid(0.0, 5)
    with pytest.raises(ValueError):
        make_time_grid(100.0, 5, scheme="cubic")


def test_grid_validation_on_walk():
    p = _process()
    den = ConstantDenoiser(Field([0.0, 0.0]))
    x = Field([1.0, 1.0])
    with pytest.raises(ValueError):
        sample_euler(p, den, x, [50.0])  # one knot
    with pytest.raises(ValueError):
        sample_euler(p, den, x, [50.0, 60.0])  # increasing
    with pytest.raises(ValueError):
        sample_euler(p, den, x, [120.0, 50.0])  # beyond horizon
    with pytest.raises(ValueError):
        sample_euler(p, den, x, [50.0, 0.0])  # terminal at the singularity


def test_trajectory_bookkeeping():
    p = _process()
    den = ConstantDenoiser(Field([0.0, 0.0]))
    x = Field([1.0, -1.0])
    grid = make_time_grid(100.0, 7)
    states = euler_trajectory(p, den, x, grid)
    assert len(states) == 8
    assert states[0] is x
    assert np.array_equal(sample_euler(p, den, x, grid).values,
                          states[-1].values)


def test_terminal_fraction_constant():
    assert TERMINAL_FRACTION == 1e-3


def test_euler_matches_contraction_closed_form():
    # with D == y and unit scale the flow obeys x(t) - y proportional to
    # sigma(t), so the terminal state is y + (x_T - y) sigma(eps)/sigma(T)
    p = _process()
    sched = p.schedule
    y = Field([0.2, -0.1])
    x_top = Field([1.5, -2.0])
    ratio = sched.sigma(0.1) / sched.sigma(100.0)
    exact = y.values + (x_top.values - y.values) * ratio
    out = sample_euler(p, ConstantDenoiser(y), x_top, make_time_grid(100.0, 10_000))
    assert np.max(np.abs(out.values - exact)) < 1e-4


def test_reference_integrator_is_sharp_on_the_closed_form():
    p = _process()
    sched = p.schedule
    y = Field([0.2, -0.1])
    x_top = Field([1.5, -2.0])
    ratio = sched.sigma(0.1) / sched.sigma(100.0)
    exact = y.values + (x_top.values - y.values) * ratio
    out = sample_reference(p, ConstantDenoiser(y), x_top, 1000)
    assert np.max(np.abs(out.values - exact)) < 1e-8


def test_reference_is_deterministic():
    p = _process()
    den = ConstantDenoiser(Field([0.3, 0.4]))
    x = Field([2.0, -1.0])
    a = sample_reference(p, den, x, 64)
    b = sample_reference(p, den, x, 64)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(ValueError):
        sample_reference(p, den, x, 3)


def test_final_denoise_jump():
    p = _process()
    y = Field([0.9, 0.9])
    out = sample_euler(p, ConstantDenoiser(y), Field([0.0, 0.0]),
                       make_time_grid(100.0, 3), final_denoise=True)
    assert np.array_equal(out.values, y.values)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_state_aborts():
    # finite inputs whose very first update overflows: |dt * rhs| crosses the
    # float ceiling even though the rhs itself is representable
    p = _process()
    den = ConstantDenoiser(Field([-1.7e308, -1.7e308]))
    x = Field([1.7e308, 1.7e308])
    with pytest.raises(RuntimeError, match="non-finite"):
        sample_euler(p, den, x, [100.0, 0.001])


def test_write_trajectory_csv(tmp_path):
    path = tmp_path / "traj.csv"
    times = [100.0, 0.1]
    states = [Field([1.0, 2.0]), Field([0.5, 0.25])]
    write_trajectory_csv(times, states, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x0,x1"
    assert lines[1] == "100.0,1.0,2.0"
    assert lines[2] == "0.1,0.5,0.25"
