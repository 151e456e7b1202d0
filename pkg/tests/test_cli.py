import json
import os

from ckequant import cli
from ckequant.config import ExperimentConfig


def write_config(tmp_path, **extra):
    cfg = {"testbed": {"n": 1, "degrees": [1, 1], "k": 4}}
    cfg.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def run(args):
    return cli.main(args)


def test_balance_run(tmp_path, capsys):
    cfg = write_config(tmp_path, solver={"max_iter": 500})
    out = tmp_path / "out"
    rc = run(["balance", "--config", cfg, "--out", str(out)])
    assert rc == 0
    reply = json.loads(capsys.readouterr().out)
    payload = json.loads(open(reply["json"]).read())
    assert payload["residual"] < 1e-10
    csv = open(reply["csv"]).read().splitlines()
    assert csv[0].split(",")[:4] == ["iter", "t", "residual", "ding_q"]
    assert "am_q_1" in csv[0] and "am_q_2" in csv[0]
    assert os.path.exists(out / "manifest.json")


def test_invalid_degrees_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"testbed": {"n": 1, "degrees": [1, 2], "k": 4}}))
    rc = run(["balance", "--config", str(path), "--out", str(tmp_path / "o")])
    assert rc == 2
    reply = json.loads(capsys.readouterr().out)
    assert reply["error"] == "SPEC_INVALID"


def test_not_converged_exit_4(tmp_path, capsys):
    cfg = write_config(tmp_path, solver={"max_iter": 2, "tol_res": 1e-14})
    rc = run(["balance", "--config", cfg, "--out", str(tmp_path / "o")])
    assert rc == 4
    reply = json.loads(capsys.readouterr().out)
    assert reply["error"] == "NOT_CONVERGED"


def test_determinism_byte_identical(tmp_path, capsys):
    cfg = write_config(tmp_path, seed=3)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run(["balance", "--config", cfg, "--out", str(out1)])
    r1 = json.loads(capsys.readouterr().out)
    run(["balance", "--config", cfg, "--out", str(out2)])
    r2 = json.loads(capsys.readouterr().out)
    assert open(r1["csv"], "rb").read() == open(r2["csv"], "rb").read()
    assert open(r1["json"], "rb").read() == open(r2["json"], "rb").read()


def test_set_override_changes_hash(tmp_path, capsys):
    cfg = write_config(tmp_path)
    run(["balance", "--config", cfg, "--out", str(tmp_path / "o1")])
    h1 = json.loads(capsys.readouterr().out)["hash"]
    run(["balance", "--config", cfg, "--set", "testbed.k=6",
         "--out", str(tmp_path / "o2")])
    h2 = json.loads(capsys.readouterr().out)["hash"]
    assert h1 != h2


def test_manifest_roundtrip(tmp_path, capsys):
    cfg = write_config(tmp_path, seed=11)
    out = tmp_path / "out"
    run(["balance", "--config", cfg, "--out", str(out)])
    first = json.loads(capsys.readouterr().out)
    manifest = json.loads(open(out / "manifest.json").read())
    rerun_cfg = tmp_path / "rerun.json"
    rerun_cfg.write_text(json.dumps(manifest["config"]))
    run(["balance", "--config", str(rerun_cfg), "--out", str(tmp_path / "out2")])
    second = json.loads(capsys.readouterr().out)
    assert manifest["hash"] == second["hash"]
    assert (open(first["csv"], "rb").read() == open(second["csv"], "rb").read())
    parsed = ExperimentConfig.from_dict(manifest["config"])
    assert parsed.testbed.k == 4 and parsed.seed == 11


def test_obstruction_json(tmp_path, capsys):
    cfg = write_config(tmp_path)
    rc = run(["obstruction", "--config", cfg, "--set", "testbed.k=1",
              "--out", str(tmp_path / "o")])
    assert rc == 0
    reply = json.loads(capsys.readouterr().out)
    payload = json.loads(open(reply["json"]).read())
    assert payload["factors"][0]["chow"] == "0/1"
    assert payload["F_c"] == ["0/1", "0/1", "0/1"]


def test_flow_subcommand(tmp_path, capsys):
    cfg = write_config(tmp_path, flow_t_end=20.0)
    rc = run(["flow", "--config", cfg, "--out", str(tmp_path / "o")])
    assert rc == 0
    reply = json.loads(capsys.readouterr().out)
    payload = json.loads(open(reply["json"]).read())
    assert payload["residual"] < 1e-10


def test_bergman_subcommand(tmp_path, capsys):
    cfg = write_config(tmp_path, k_list=[4, 8, 16, 32])
    rc = run(["bergman", "--config", cfg, "--out", str(tmp_path / "o")])
    assert rc == 0
    reply = json.loads(capsys.readouterr().out)
    payload = json.loads(open(reply["json"]).read())
    assert -1.15 <= payload["slope_leading"] <= -0.85
    assert payload["max_balanced_deviation"] < 1e-12


def test_spectrum_subcommand(tmp_path, capsys):
    cfg = write_config(tmp_path)
    rc = run(["spectrum", "--config", cfg, "--out", str(tmp_path / "o")])
    assert rc == 0
    reply = json.loads(capsys.readouterr().out)
    payload = json.loads(open(reply["json"]).read())
    assert payload["numerical_kernel_dim"] == 3
    assert payload["max_eigenvalue"] <= 1e-8
    csv = open(reply["csv"]).read().splitlines()
    assert csv[0] == "eig_index,eigenvalue"


def test_almost_subcommand(tmp_path, capsys):
    cfg = write_config(tmp_path, k_list=[8, 16, 32])
    rc = run(["almost", "--config", cfg, "--out", str(tmp_path / "o")])
    assert rc == 0
    reply = json.loads(capsys.readouterr().out)
    payload = json.loads(open(reply["json"]).read())
    assert -2.3 <= payload["slope_corrected"] <= -1.7
    csv = open(reply["csv"]).read().splitlines()
    assert csv[0] == "k,sup_dev_uncorrected,sup_dev_corrected"


def test_cflow_subcommand(tmp_path, capsys):
    cfg = write_config(tmp_path, radial_nodes=128, flow_t_end=1.0,
                       cflow_epsilon=0.05, cflow_dt=2e-5)
    rc = run(["cflow", "--config", cfg, "--out", str(tmp_path / "o")])
    assert rc == 0
    reply = json.loads(capsys.readouterr().out)
    payload = json.loads(open(reply["json"]).read())
    assert payload["sup_phi_final"] <= payload["sup_phi_initial"]
    csv = open(reply["csv"]).read().splitlines()
    assert csv[0] == "t,sup_phi,ding,mass_err"
