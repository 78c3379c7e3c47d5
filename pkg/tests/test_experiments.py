import filecmp
import os
from dataclasses import replace

import numpy as np
import pytest

from core.backgrounds import ZndBackground
from core.errors import ConfigError, ParseError, RangeError, UnknownKey
from core.experiments import (
    Experiment, _accept_kappa, _accept_profile, accept, eigen_machinery_check,
    experiment_name, fit_decay_file, load_config, machinery_passed, parse_config, reproducible_artifacts,
    run_experiment, stability_checks, znd_blowup_experiment,
)
from config import CONFIGS_DIR
from main import main
from utils.csv_utils import read_columns, write_columns


def _first_line(path):
    with open(path) as f:
        return f.readline().strip()


def test_defaults():
    cfg = parse_config("")
    assert cfg.experiment is Experiment.PROFILE
    assert cfg["wave.q"] == 0.09
    assert cfg["energy.epsilon"] is None


def test_parse_values_and_comments():
    cfg = parse_config(
        "# smoke run\n"
        "experiment = majda-damping\n"
        "wave.q = 0.05   # reduced heat release\n"
        "energy.eta = auto\n"
        "no_damping.members = 2, 4\n"
        "seed = 7\n"
    )
    assert cfg.experiment is Experiment.MAJDA_DAMPING
    assert cfg["wave.q"] == 0.05
    assert cfg["energy.eta"] is None
    assert cfg["no_damping.members"] == (2, 4)
    assert cfg.seed == 7


def test_parse_errors():
    with pytest.raises(ParseError) as exc:
        parse_config("wave.q = 0.1\nwave.k 2.0\n")
    assert exc.value.line_number == 2
    with pytest.raises(ParseError):
        parse_config("wave.k = fast")
    with pytest.raises(UnknownKey):
        parse_config("wave.speed = 1")
    with pytest.raises(RangeError):
        parse_config("wave.k = -1")
    with pytest.raises(RangeError):
        parse_config("sim.cfl = 0.5")
    with pytest.raises(RangeError):
        parse_config("perturb.left = -2\nperturb.right = -3")
    with pytest.raises(RangeError):
        parse_config("flux.kind = polynomial")


@pytest.mark.parametrize("name, experiment", [
    ("profile_smoke.cfg", Experiment.PROFILE),
    ("majda_smoke.cfg", Experiment.MAJDA_STABILITY),
    ("znd_smoke.cfg", Experiment.ZND_BLOWUP),
])
def test_shipped_configs_load(name, experiment):
    cfg = load_config(os.path.join(CONFIGS_DIR, name))
    assert cfg.experiment is experiment


def test_with_values_copies():
    cfg = parse_config("")
    other = cfg.with_values(wave__q=0.02, perturb__field="zeta")
    assert other["wave.q"] == 0.02 and other["perturb.field"] == "zeta"
    assert cfg["wave.q"] == 0.09
    with pytest.raises(UnknownKey):
        cfg.with_values(wave__speed=1.0)
    with pytest.raises(RangeError):
        cfg.with_values(wave__k=0.0)


def test_experiment_names_round_trip():
    assert experiment_name(Experiment.ZND_BLOWUP) == "znd-blowup"


def test_profile_experiment_artifacts(tmp_path):
    cfg = replace(parse_config(""), out_dir=str(tmp_path))
    result = run_experiment(cfg)
    assert result.passed
    assert _first_line(tmp_path / "profile.csv") == "x,u_bar,z_bar,du_bar"
    assert _first_line(tmp_path / "profile_summary.csv") == "key,value"
    columns = read_columns(str(tmp_path / "profile.csv"))
    assert columns["u_bar"][-1] == pytest.approx(1.0, abs=1e-2)


def test_profile_experiment_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    run_experiment(replace(parse_config(""), out_dir=str(first)))
    run_experiment(replace(parse_config(""), out_dir=str(second)))
    for name in ("profile.csv", "profile_summary.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_fit_decay_file(tmp_path):
    t = np.linspace(0.0, 20.0, 81)
    path = write_columns(str(tmp_path / "run.csv"), {"t": t, "energy": 3.0 * np.exp(-0.2 * t)})
    summary = fit_decay_file(path)
    assert summary["theta_hat"] == pytest.approx(0.2, abs=1e-10)
    assert os.path.exists(tmp_path / "fit_decay_summary.csv")
    with pytest.raises(ConfigError):
        fit_decay_file(path, column="norm_h2")


def test_main_exit_codes(tmp_path):
    assert main(["profile", "--out", str(tmp_path)]) == 0
    assert main(["profile", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("wave.k = -3\n")
    assert main(["profile", "--config", str(bad)]) == 2


def test_accept_subset(tmp_path):
    cfg = replace(parse_config(""), out_dir=str(tmp_path))
    passed, items = accept(cfg, items=[_accept_profile, _accept_kappa])
    assert passed
    assert [item.id for item in items] == [1, 2]
    assert _first_line(tmp_path / "accept_summary.csv") == "id,name,passed,measured,expected"


def test_blowup_keys_parse():
    cfg = parse_config("blowup.ensemble_dt = 0.05\nblowup.grid_factor = 8\n")
    assert cfg["blowup.ensemble_dt"] == 0.05
    assert cfg["blowup.grid_factor"] == 8.0


def _summary(theta_hat=0.1, r2=0.99, psi_rate=0.05, psi_r2=0.99):
    return {"status": "COMPLETED", "theta_hat": theta_hat, "r2": r2, "psi_rate": psi_rate,
            "psi_r2": psi_r2, "sup_bounded": True}


def test_stability_checks():
    assert all(stability_checks(_summary()).values())
    assert not stability_checks(_summary(r2=0.5))["decays"]
    assert not stability_checks(_summary(theta_hat=-0.1))["decays"]
    assert not stability_checks(_summary(psi_rate=0.2))["psi_comparable"]
    assert not stability_checks(_summary(psi_rate=0.01))["psi_comparable"]
    assert not stability_checks(_summary(psi_r2=0.3))["psi_decays"]


def test_majda_stability_decays_before_the_energy_floor(tmp_path):
    cfg = parse_config(
        "experiment = majda-stability\n"
        "flux.kind = burgers\n"
        "wave.q = 0.01\n"
        "perturb.field = v\n"
        "perturb.amplitude = 1e-3\n"
        "perturb.left = -6.0\n"
        "perturb.right = -5.0\n"
        "sim.t_max = 50.0\n"
    )
    result = run_experiment(replace(cfg, out_dir=str(tmp_path)))
    s = result.summary
    assert s["theta_hat"] > 0
    assert s["r2"] >= 0.98
    assert all(stability_checks(s).values())
    assert result.passed


def test_gas_machinery_passes():
    out = eigen_machinery_check(ZndBackground(), np.random.default_rng(0), samples=200)
    assert out["w_residual"] <= 1e-4
    assert out["spectrum"] <= 1e-10
    assert machinery_passed(out)
    assert not machinery_passed(dict(out, w_residual=1e-2))


def test_znd_blowup_halves_with_amplitude(tmp_path):
    cfg = parse_config("experiment = znd-blowup\nblowup.theta = 0.8\nblowup.h = 0.02\n")
    result = znd_blowup_experiment(replace(cfg, out_dir=str(tmp_path)))
    s = result.summary
    assert s["verdict"] == "BLOWUP"
    assert s["half_verdict"] == "BLOWUP"
    assert s["grid_grad_growth"] >= cfg["blowup.grid_factor"]
    assert s["T_star_ratio"] == pytest.approx(2.0, abs=0.4)
    assert s["z_hat_max"] <= 1e-13


def test_seeded_artifacts_are_bit_identical(tmp_path):
    cfg = parse_config("seed = 3\n")
    first = reproducible_artifacts(cfg, str(tmp_path / "a"), theta=0.8, h=0.02)
    second = reproducible_artifacts(cfg, str(tmp_path / "b"), theta=0.8, h=0.02)
    assert [os.path.relpath(p, tmp_path / "a") for p in first] == \
        [os.path.relpath(p, tmp_path / "b") for p in second]
    assert any(p.endswith("znd-blowup.csv") for p in first)
    for p, q in zip(first, second):
        assert filecmp.cmp(p, q, shallow=False), os.path.basename(p)
