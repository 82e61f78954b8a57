import json
import textwrap
from pathlib import Path

import pytest

from main import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, text, name="experiment.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return str(path)


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def test_exponents_prints_schedule(capsys, tmp_path):
    code = main(["exponents", "--p", "3", "--q", "2", "--q-target", "3", "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["schedule"]["exact"]["lambda_q"] == "10/3"
    assert payload["schedule"]["exact"]["p1"] == "4/3"
    assert all(payload["schedule"]["conditions"].values())
    assert payload["chain"]["m"] == 5
    assert payload["chain"]["R0_over_R_target"] == 1024.0
    assert payload["regime"] == "nonnegative_liouville"
    assert read_json(tmp_path / "schedule.json") == payload


def test_exponents_with_explicit_lambda(capsys):
    assert main(["exponents", "--p", "3", "--q", "2", "--qbar", "2.2", "--lambda", "3.3"]) == 0
    exact = json.loads(capsys.readouterr().out)["schedule"]["exact"]
    assert (exact["theta"], exact["alpha"], exact["alpha_conj"], exact["holder_ratio"]) == (
        "26/33",
        "30/7",
        "30/23",
        "39/23",
    )


@pytest.mark.parametrize(
    "argv",
    [
        ["exponents", "--p", "3", "--q", "1.5"],
        ["exponents", "--p", "3", "--q", "2", "--qbar", "2.5"],
        ["exponents"],
    ],
)
def test_exponents_rejects_bad_input(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_simulate_ode_mode(tmp_path):
    out = tmp_path / "ode"
    code = main(["simulate", "--config", str(CONFIG_DIR / "ode_mode.yaml"), "--out", str(out)])
    assert code == 0
    rate = read_json(out / "rate.json")
    assert rate["outcome"] == "blowup"
    assert rate["blowup"]["T_est"] == pytest.approx(0.5, rel=1e-2)
    assert rate["rate"]["exponent"] == pytest.approx(0.5, abs=1e-3)
    assert rate["rate"]["lower_bound_ok"] is True
    assert (out / "trajectory.csv").exists()
    assert (out / "config.yaml").exists()

    assert main(["report", "--out", str(out)]) == 0
    assert (out / "sup_norm.png").stat().st_size > 0
    assert (out / "plateau.png").stat().st_size > 0


def test_simulate_zero_data_reports_no_blowup(tmp_path):
    config = write_config(
        tmp_path,
        """\
        initial_data:
          kind: zero
        """,
    )
    out = tmp_path / "zero"
    assert main(["simulate", "--config", config, "--out", str(out)]) == 3
    rate = read_json(out / "rate.json")
    assert rate["outcome"] == "no-blow-up-detected"
    assert rate["blowup"] is None


def test_simulate_is_reproducible(tmp_path):
    config = str(CONFIG_DIR / "ode_mode.yaml")
    for name in ("first", "second"):
        assert main(["simulate", "--config", config, "--out", str(tmp_path / name), "--seed", "11"]) == 0
    for artifact in ("trajectory.csv", "rate.json"):
        assert (tmp_path / "first" / artifact).read_bytes() == (tmp_path / "second" / artifact).read_bytes()


def test_invalid_config_exits_with_validation_code(tmp_path, capsys):
    config = write_config(
        tmp_path,
        """\
        system:
          components: 2
          coupling: [[1.0, 2.0], [0.0, 1.0]]
        """,
    )
    assert main(["simulate", "--config", config, "--out", str(tmp_path / "never")]) == 2
    err = capsys.readouterr().err
    assert f"{config}:3: system.coupling" in err
    assert not (tmp_path / "never").exists()


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "absent.yaml")]) == 2


def test_report_needs_artifacts(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 2


def test_rescaled_stationary_kappa(tmp_path):
    config = write_config(
        tmp_path,
        """\
        system:
          components: 2
          coupling: ones
        initial_data:
          kind: kappa
        solver:
          ds: 5.0e-3
          s_max: 2.0
          frame_every: 10
        monitors:
          q_values: [2.0]
        """,
    )
    out = tmp_path / "kappa"
    assert main(["rescaled", "--config", config, "--out", str(out)]) == 0
    monitor = read_json(out / "monitor.json")
    assert monitor["frames"] == 41
    assert [report["status"] for report in monitor["monitors"]] == ["pass"]
    schedule = read_json(out / "schedule.json")
    assert schedule["schedules"][0]["finite"] is True
    assert (out / "energy.csv").exists()
    assert (out / "final_frame.csv").exists()
    assert (out / "final_frame.json").exists()

    assert main(["report", "--out", str(out)]) == 0
    assert (out / "energy.png").exists()


def test_rescaled_overflow_exits_with_numerical_code(tmp_path, capsys):
    config = write_config(
        tmp_path,
        """\
        initial_data:
          kind: gaussian
          amplitude: 1.0e+6
        solver:
          ds: 5.0e-3
          s_max: 0.5
        """,
    )
    code = main(["rescaled", "--config", config, "--out", str(tmp_path / "overflow")])
    assert code == 5
    assert "NUMERICAL BREAKDOWN" in capsys.readouterr().err


@pytest.mark.slow
def test_verify_suites_pass(tmp_path):
    out = tmp_path / "verify"
    code = main(["verify", "--config", str(CONFIG_DIR / "verify.yaml"), "--out", str(out), "--threads", "2"])
    suites = read_json(out / "verify.json")["suites"]
    assert {name: suite["status"] for name, suite in suites.items()} == {
        "structure": "pass",
        "stationary": "pass",
        "identities": "pass",
        "monitors": "pass",
        "subsolution": "pass",
    }
    assert code == 0
