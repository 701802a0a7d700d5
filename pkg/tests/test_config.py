import numpy as np
import pytest

from nonsmooth_control.config import (ConfigError, RunConfig, load_config, make_grid,
                                      make_nonlinearity, make_problem, schedule, t_sequence)
from nonsmooth_control.grid import build_grid, write_grid_function

from conftest import reference_problem


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoad:
    def test_defaults_are_reference_problem(self):
        cfg = load_config(None)
        problem = make_problem(cfg)
        ref = reference_problem(199)
        np.testing.assert_allclose(problem.integrand.target, ref.integrand.target)
        assert (problem.nu, problem.kappa, problem.alpha, problem.beta) == \
            (ref.nu, ref.kappa, ref.alpha, ref.beta)
        assert problem.f.K == 1 and problem.f.breakpoints[0] == 0.0
        assert schedule(cfg)[0] == 0.1 and schedule(cfg)[-1] == 0.0
        np.testing.assert_allclose(t_sequence(cfg), 1e-3 * 2.0 ** np.arange(7, -1, -1))

    def test_round_trip(self, tmp_path):
        cfg = load_config(write(tmp_path, "[problem]\nn = 31 15\ndomain = 0 1 0 2\n"
                                          "nonlinearity = piecewise-cubic\nbreakpoints = 0 1\n"
                                          "coefficients = 0 1; 0 2 0 1; -3 6\n"
                                          "[solver]\nkappas = 0.01 0.1\n"))
        again = load_config(write(tmp_path, cfg.to_ini(), "echo.ini"))
        assert again == cfg
        assert make_grid(cfg).n == (31, 15)

    @pytest.mark.parametrize("text", [
        "[problem]\nnu = 0\n", "[problem]\nbogus = 1\n", "[extra]\n", "[problem]\nn = a\n",
        "[problem]\ndomain = 0 1 2\n", "[solver]\neps_factor = 1\n", "[solver]\nt_count = 2\n",
        "[solver]\nkappas = 1 0.1\n", "[problem]\nnonlinearity = tanh\n",
        "[problem]\nnonlinearity = piecewise-linear\nbreakpoints = 1 0\nslopes = 0 1 2\n",
        "[problem]\ntarget = import os\n", "not an ini",
    ])
    def test_rejects(self, tmp_path, text):
        with pytest.raises(ConfigError):
            cfg = load_config(write(tmp_path, text))
            make_problem(cfg)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "none.ini")

    def test_overrides(self):
        cfg = load_config(None).with_overrides(kappa=0.1, seed=None, n=(50,))
        assert cfg.problem.kappa == 0.1 and cfg.solver.seed == 0 and make_grid(cfg).n == (50,)
        with pytest.raises(ConfigError):
            cfg.with_overrides(nope=1)
        with pytest.raises(ConfigError):
            cfg.with_overrides(kappa=-1.0)


class TestFields:
    def test_file_field_relative_to_config(self, tmp_path):
        grid = build_grid((0.0, 1.0), 19)
        target = grid.sample(lambda x: x**2)
        write_grid_function(tmp_path / "target.txt", grid, target)
        cfg = load_config(write(tmp_path, "[problem]\nn = 19\ntarget = file: target.txt\n"))
        np.testing.assert_array_equal(make_problem(cfg).integrand.target, target)

    def test_file_on_wrong_grid(self, tmp_path):
        grid = build_grid((0.0, 1.0), 10)
        write_grid_function(tmp_path / "t.txt", grid, np.zeros(10))
        with pytest.raises(ConfigError):
            make_problem(load_config(write(tmp_path, "[problem]\nn = 19\ntarget = file:t.txt\n")))

    def test_anisotropic_diffusion_2d(self, tmp_path):
        cfg = load_config(write(tmp_path, "[problem]\ndomain = 0 1 0 1\nn = 9\n"
                                          "diffusion = 2 0.5 1\ntarget = x1*x2\n"))
        problem = make_problem(cfg)
        assert problem.grid.dim == 2
        assert abs(problem.operator.matrix - problem.operator.matrix.T).max() < 1e-12

    def test_piecewise_linear(self):
        cfg = RunConfig().with_overrides(nonlinearity="piecewise-linear", breakpoints=(0.0, 1.0),
                                         slopes=(0.0, 1.0, 2.0), value_at_first=0.0)
        f = make_nonlinearity(cfg)
        np.testing.assert_allclose(f.value(np.array([-1.0, 0.5, 2.0])), [0.0, 0.5, 3.0])
