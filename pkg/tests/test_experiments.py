import re

import numpy as np
import pytest

from qbmdarwin import cli
from qbmdarwin import experiments as ex
from qbmdarwin.errors import ConfigurationError, OracleInconclusiveError

TOY = """
# toy model
n_osc = 4
omega_s = 0.35, 0.5, 0.65, 0.9
squeezing_r = 2
t_max = 20
dt = 0.1
redundancy_dt = 5
t_eval = 20
fraction_step = 0.25
n_samples = 3
"""


@pytest.fixture
def toy_cfg(tmp_path):
    path = tmp_path / "toy.cfg"
    path.write_text(TOY)
    return path


@pytest.fixture
def toy(toy_cfg):
    return ex.ExperimentConfig.from_file(toy_cfg)


class TestConfigParsing:
    def test_comments_and_blank_lines(self):
        values = ex.parse_config_text("a = 1 # trailing\n\n# full line\nb=2\n")
        assert values == {"a": "1", "b": "2"}

    def test_missing_equals(self):
        with pytest.raises(ConfigurationError):
            ex.parse_config_text("n_osc 4\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError) as info:
            ex.ExperimentConfig.from_mapping({"kapa": "0.1"})
        assert info.value.field == "kapa"

    def test_bad_value(self):
        with pytest.raises(ConfigurationError) as info:
            ex.ExperimentConfig.from_mapping({"n_osc": "many"})
        assert info.value.field == "n_osc"

    def test_types(self, toy):
        assert toy.n_osc == 4
        assert toy.omega_s == (0.35, 0.5, 0.65, 0.9)
        np.testing.assert_allclose(toy.fraction_grid, [0.25, 0.5, 0.75, 1.0])
        assert toy.redundancy_times.tolist() == [0.0, 5.0, 10.0, 15.0, 20.0]
        assert toy.time_grid.size == 201

    def test_linspace_grid(self):
        cfg = ex.ExperimentConfig.from_mapping(
            {"omega_s_min": "0.2", "omega_s_max": "0.4", "omega_s_points": "3"}
        )
        np.testing.assert_allclose(cfg.omega_grid, [0.2, 0.3, 0.4])

    def test_overrides(self, toy):
        cfg = toy.with_overrides(kappa="0.02", master_seed="9", omega_s="0.5")
        assert cfg.kappa == 0.02 and cfg.master_seed == 9 and cfg.omega_s == (0.5,)
        assert cfg.n_osc == toy.n_osc

    def test_shipped_configs(self):
        names = ex.shipped_configs()
        assert {"fig1.cfg", "fig2.cfg", "fig3.cfg"} <= set(names)
        for name in names:
            ex.ExperimentConfig.from_file(name).validate()

    def test_shipped_parameters(self):
        fig1 = ex.ExperimentConfig.from_file("fig1.cfg")
        fig2 = ex.ExperimentConfig.from_file("fig2.cfg")
        fig3 = ex.ExperimentConfig.from_file("fig3.cfg")
        for cfg in (fig1, fig2, fig3):
            assert (cfg.n_osc, cfg.omega0, cfg.omegaR) == (300, 0.3, 0.7)
        assert fig1.squeezing_r == 10 and fig1.delta == 0.05
        assert fig2.squeezing_r == 3 and fig2.t_eval == 40 and fig2.omega_s == (0.3, 0.7, 1.0)
        assert fig3.squeezing_r == 10 and fig3.t_max == 150 and fig3.omega_grid.size == 60

    def test_missing_file(self):
        with pytest.raises(ConfigurationError):
            ex.ExperimentConfig.from_file("no_such.cfg")


class TestValidation:
    @pytest.mark.parametrize(
        "overrides,field,pattern",
        [
            ({"omega0": "0.8"}, "omega0", "omega0 must satisfy"),
            ({"delta": "1.5"}, "delta", "delta must lie"),
            ({"delta": "0"}, "delta", "delta must lie"),
            ({"dt": "0"}, "dt", "dt must be positive"),
            ({"redundancy_dt": "-1"}, "redundancy_dt", "redundancy_dt must be positive"),
            ({"omega_s": "0.5, 0.4"}, "omega_s", "strictly increasing"),
            ({"n_osc": "300", "kappa": "0.3", "omega_s": "0.1, 0.5"}, "omega_s", "unstable model at omega_s=0.1"),
            ({"pairs": "cats"}, "pairs", "pairs must be"),
            ({"n_samples": "0"}, "n_samples", "n_samples"),
        ],
    )
    def test_rejections(self, toy, overrides, field, pattern):
        with pytest.raises(ConfigurationError) as info:
            toy.with_overrides(**overrides).validate()
        assert info.value.field == field
        assert re.search(pattern, str(info.value))

    def test_messages_distinct(self, toy):
        bad = [{"omega0": "0.8"}, {"delta": "2"}, {"dt": "0"}, {"omega_s": "0.5, 0.4"},
               {"n_osc": "300", "kappa": "0.3", "omega_s": "0.1"}]
        messages = set()
        for b in bad:
            with pytest.raises(ConfigurationError) as info:
                toy.with_overrides(**b).validate()
            messages.add(str(info.value))
        assert len(messages) == len(bad)


class TestCsv:
    def test_format(self):
        text = ex.render_csv(("a", "b"), [(1.0, 1 / 3), (2.5e-20, -7)], comment="x")
        assert text == "# x\na,b\n1,0.333333333333\n2.5e-20,-7\n"

    def test_body_strips_comment(self):
        assert ex.csv_body("# stamp\nh\n1\n") == "h\n1\n"

    def test_write(self, tmp_path):
        path = ex.write_csv(tmp_path / "out" / "x.csv", ("a",), [(1.0,)], "test")
        lines = path.read_bytes().split(b"\n")
        assert lines[0].startswith(b"# qbmdarwin test generated")
        assert lines[1:] == [b"a", b"1", b""]


class TestRunners:
    def test_redundancy_rows(self, toy):
        rows = ex.run_redundancy_dynamics(toy)
        assert len(rows) == len(toy.omega_s) * toy.redundancy_times.size
        assert all(0.0 < r[2] <= 1.0 for r in rows)
        assert [r[:2] for r in rows] == sorted(r[:2] for r in rows)

    def test_redundancy_t_zero_only(self, toy):
        rows = ex.run_redundancy_dynamics(toy.with_overrides(t_max="0"))
        assert len(rows) == 4
        assert all(r[2] == 1.0 for r in rows)

    def test_redundancy_unstable(self, toy):
        with pytest.raises(ConfigurationError, match="omega_s=0.1"):
            ex.run_redundancy_dynamics(toy.with_overrides(n_osc="300", kappa="0.2", omega_s="0.1"))

    def test_partial_info(self, toy):
        rows = ex.run_partial_info(toy)
        assert len(rows) == 4 * 4
        for r in rows:
            if r[1] == 1.0:
                assert r[2] / r[4] == pytest.approx(2.0, abs=1e-6)

    def test_partial_info_uncoupled(self, toy):
        rows = ex.run_partial_info(toy.with_overrides(kappa="0"))
        for r in rows:
            if r[1] < 1.0:
                assert r[2] == pytest.approx(0.0, abs=1e-9)

    def test_sweep_uncoupled_single_point(self, toy):
        rows = ex.run_spectrum_sweep(toy.with_overrides(kappa="0", omega_s="0.5"))
        assert len(rows) == 1
        omega, j, nm, f, nf, h = rows[0]
        assert j == 0.0 and nm == pytest.approx(0.0, abs=1e-9) and nf == 0.0 and f == 1.0

    def test_sweep_columns(self, toy):
        rows = ex.run_spectrum_sweep(toy)
        assert len(rows) == 4
        for omega, j, nm, f, nf, h in rows:
            assert np.isfinite([j, nm, f, nf, h]).all()
            assert 0.0 < f <= 1.0
            assert nm >= 0.0 and nf >= 0.0

    def test_parallel_equals_serial(self, toy):
        a = ex.render_csv(ex.REDUNDANCY_HEADER, ex.run_redundancy_dynamics(toy, workers=1))
        b = ex.render_csv(ex.REDUNDANCY_HEADER, ex.run_redundancy_dynamics(toy, workers=3))
        assert a == b


class TestOracle:
    def test_default_coupling_passes(self):
        cfg = ex.ExperimentConfig.from_file("oracle.cfg")
        report = ex.run_oracle_check(cfg)
        assert report.passed and report.max_deviation < 1e-6
        assert len(report.checkpoints) == 5

    def test_uncoupled_is_exact(self):
        cfg = ex.ExperimentConfig.from_file("oracle.cfg").with_overrides(kappa="0")
        assert ex.run_oracle_check(cfg).max_deviation < 1e-10

    def test_corrupted_propagator_fails(self):
        def flipped(model, t):
            s = model.propagator(t).copy()
            s[0, 1] = -s[0, 1]
            return s

        cfg = ex.ExperimentConfig.from_file("oracle.cfg")
        report = ex.run_oracle_check(cfg, propagator_fn=flipped)
        assert not report.passed

    def test_inconclusive(self):
        cfg = ex.ExperimentConfig.from_file("oracle.cfg")
        with pytest.raises(OracleInconclusiveError):
            ex.run_oracle_check(cfg, conv_tol=1e-30, max_halvings=2)

    def test_needs_small_bath(self):
        with pytest.raises(ConfigurationError):
            ex.run_oracle_check(ex.ExperimentConfig.from_file("oracle.cfg").with_overrides(n_osc="10"))

    def test_rk4_free_oscillator(self):
        gen = np.array([[0.0, 1.0], [-1.0, 0.0]])
        (r,) = ex.rk4_propagator(gen, [np.pi / 2], 200.0)
        np.testing.assert_allclose(r, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-9)


class TestAudit:
    def test_small_model(self, small_model):
        res = ex.audit_symplectic(small_model, np.linspace(0, 150, 40), exact_every=5)
        assert res.max_symplectic_residual < 1e-12
        assert res.max_purity_bound < 1e-8
        assert res.max_purity_exact <= res.max_purity_bound + 1e-12

    def test_detects_corruption(self, small_model, monkeypatch):
        original = ex.propagator_blocks

        def bad(basis, t):
            a, b, c, d = original(basis, t)
            a = a.copy()
            a[0, 0] *= 1.001
            return a, b, c, d

        monkeypatch.setattr(ex, "propagator_blocks", bad)
        res = ex.audit_symplectic(small_model, [1.0, 2.0])
        assert res.max_symplectic_residual > 1e-6
        assert res.max_purity_bound > 1e-6


class TestCli:
    def test_validate(self, toy_cfg, capsys):
        assert cli.main(["validate", "--config", str(toy_cfg)]) == 0
        assert "ok" in capsys.readouterr().out

    def test_validate_shipped_name(self):
        assert cli.main(["validate", "--config", "fig3.cfg"]) == 0

    def test_config_error_exit_code(self, toy_cfg, capsys):
        assert cli.main(["validate", "--config", str(toy_cfg), "--omega0", "0.9"]) == 2
        assert "omega0" in capsys.readouterr().err

    def test_unstable_exit_code(self, toy_cfg, capsys):
        code = cli.main(["validate", "--config", str(toy_cfg), "--n_osc", "300", "--kappa", "2"])
        assert code == 2
        assert "omega_s=0.35" in capsys.readouterr().err

    def test_oracle(self, capsys):
        assert cli.main(["oracle", "--config", "oracle.cfg"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_numerical_exit_code(self, monkeypatch, capsys):
        def broken(config):
            return ex.OracleReport(0.5, [1.0], [1.0], 1.0, 10.0, False)

        monkeypatch.setattr(ex, "run_oracle_check", broken)
        assert cli.main(["oracle", "--config", "oracle.cfg"]) == 3

    def test_consistency_exit_code(self, monkeypatch, toy_cfg, tmp_path):
        from qbmdarwin.errors import ConsistencyError

        def boom(config, workers=1):
            raise ConsistencyError("corrupted")

        monkeypatch.setitem(cli._OUTPUTS, "sweep", ("sweep.csv", ex.SWEEP_HEADER, boom))
        assert cli.main(["sweep", "--config", str(toy_cfg), "--out", str(tmp_path)]) == 3

    @pytest.mark.parametrize("command,name,header", [
        ("redundancy", "redundancy.csv", "omega_s,t,f_delta,h_system"),
        ("partial-info", "partial_info.csv", "omega_s,f,mi_mean,mi_stderr,h_system"),
        ("sweep", "sweep.csv", "omega_s,J,n_measure,f_delta,nf_measure,h_system"),
    ])
    def test_outputs_deterministic(self, toy_cfg, tmp_path, command, name, header):
        bodies = []
        for k, workers in enumerate(("1", "1", "2")):
            out = tmp_path / f"run{k}"
            argv = [command, "--config", str(toy_cfg), "--out", str(out), "--workers", workers]
            assert cli.main(argv) == 0
            text = (out / name).read_text()
            assert text.startswith("# ")
            bodies.append(ex.csv_body(text))
        assert bodies[0] == bodies[1] == bodies[2]
        assert bodies[0].splitlines()[0] == header

    def test_seed_flag(self, toy_cfg, tmp_path):
        outs = []
        for seed in ("1", "2"):
            out = tmp_path / seed
            cli.main(["partial-info", "--config", str(toy_cfg), "--out", str(out), "--seed", seed,
                      "--n_osc", "12"])
            outs.append(ex.csv_body((out / "partial_info.csv").read_text()))
        assert outs[0] != outs[1]
