"""Command-line tests: subcommands, written files and exit codes."""
import pytest

from main import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_REJECTED, main


NOISELESS = ["--set", "link.snr_db=null"]


def test_crlb_writes_both_tables(tmp_path) -> None:
    code = main(["crlb", "--out", str(tmp_path), "--bandwidth", "10e6", "--bandwidth", "20e6", "--length", "256"])
    assert code == EXIT_OK
    assert (tmp_path / "crlb.csv").exists()
    assert (tmp_path / "crlb.dat").read_text(encoding="utf-8").splitlines()[0] == "bw 256"


def test_post_integration_crlb(tmp_path) -> None:
    args = ["crlb", "--out", str(tmp_path), "--bandwidth", "36e6", "--length", "512", "--snr-convention", "post-integration"]
    assert main(args) == EXIT_OK


def test_run_prints_the_solution(capsys) -> None:
    assert main(["run", *NOISELESS]) == EXIT_OK
    assert "measurement 0: tof=" in capsys.readouterr().out


def test_unknown_override_is_a_config_error() -> None:
    assert main(["run", "--set", "link.distance=3"]) == EXIT_CONFIG_ERROR


def test_missing_config_file(tmp_path) -> None:
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG_ERROR


def test_rejected_exchange(tmp_path) -> None:
    assert main(["run", *NOISELESS, "--set", "trigger.rssi_threshold=2.0"]) == EXIT_REJECTED


def test_waveform_dump(tmp_path) -> None:
    assert main(["waveform", *NOISELESS, "--out", str(tmp_path)]) == EXIT_OK
    tx = (tmp_path / "waveform_tx.dat").read_text(encoding="utf-8").splitlines()
    assert tx[0] == "t real imag"
    assert (tmp_path / "waveform_rx_a.dat").exists()


def test_small_sweep(tmp_path) -> None:
    args = ["sweep", *NOISELESS, "--trials", "2", "--bandwidth", "20e6", "--length", "256", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    rows = (tmp_path / "results.csv").read_text(encoding="utf-8").splitlines()
    assert len(rows) == 2
    assert rows[1].startswith("20000000.0,256,0.0,0.0,0.0,2")
    assert (tmp_path / "ll_256_bw.dat").exists()


def test_sweep_with_every_trial_rejected(tmp_path) -> None:
    args = ["sweep", *NOISELESS, "--trials", "2", "--length", "256", "--out", str(tmp_path),
            "--set", "trigger.rssi_threshold=2.0"]
    assert main(args) == EXIT_REJECTED
    assert (tmp_path / "results.csv").exists()


def test_subcommand_is_required() -> None:
    with pytest.raises(SystemExit):
        main([])
