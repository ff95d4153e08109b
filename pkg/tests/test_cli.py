"""CLI harness: subcommands, outputs, exit codes."""

import json

import pytest

from trackday.cli import EXIT_DISQUALIFIED, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestTracks:
    def test_list(self, capsys):
        code, out, _ = run_cli(capsys, "tracks", "list")
        assert code == EXIT_OK
        rows = json.loads(out)
        assert {r["name"] for r in rows} == {"oval", "scurve", "speedtrap"}
        oval = next(r for r in rows if r["name"] == "oval")
        assert oval["length_m"] == pytest.approx(588.49, abs=0.05)

    def test_validate_bundled(self, capsys):
        code, out, _ = run_cli(capsys, "tracks", "validate", "oval")
        assert code == EXIT_OK
        assert json.loads(out)["status"] == "ok"

    def test_validate_bad_file(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"name": "x", "closed": True,
                                   "centerline": [[0, 0], [1, 0]],
                                   "half_width_left": 1, "half_width_right": 1}))
        code, _, err = run_cli(capsys, "tracks", "validate", str(bad))
        assert code == EXIT_RUNTIME
        assert "error" in err


class TestRun:
    def test_random_agent_writes_outputs(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "run", "--agent", "random", "--track", "oval",
            "--seed", "1", "--out", str(tmp_path / "r"),
        )
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["agent"] == "random"
        assert doc["termination_reason"] in ("out_of_bounds", "insufficient_progress")
        assert (tmp_path / "r" / "log.json").exists()
        assert (tmp_path / "r" / "report.json").exists()

    def test_unknown_agent_is_runtime_error(self, capsys):
        code, _, err = run_cli(capsys, "run", "--agent", "psychic", "--track", "oval")
        assert code == EXIT_RUNTIME

    def test_missing_agent_is_usage_error(self, capsys):
        code, _, _ = run_cli(capsys, "run", "--track", "oval")
        assert code == EXIT_USAGE

    def test_replay_reproduces_run(self, capsys, tmp_path):
        code, _, _ = run_cli(
            capsys, "record", "--agent", "random", "--track", "oval",
            "--seed", "5", "--out", str(tmp_path / "session"),
        )
        assert code == EXIT_OK
        code, out, _ = run_cli(
            capsys, "run", "--agent", f"replay:{tmp_path / 'session'}",
            "--track", "oval", "--out", str(tmp_path / "replayed"),
        )
        assert code == EXIT_OK
        replay_doc = json.loads(out)

        manifest = json.loads((tmp_path / "session" / "manifest.json").read_text())
        assert replay_doc["steps"] == manifest["record_count"]

        # the replayed trajectory equals a direct run of the same agent/seed
        code, _, _ = run_cli(
            capsys, "run", "--agent", "random", "--track", "oval",
            "--seed", "5", "--out", str(tmp_path / "direct"),
        )
        assert code == EXIT_OK
        replayed = json.loads((tmp_path / "replayed" / "log.json").read_text())
        direct = json.loads((tmp_path / "direct" / "log.json").read_text())
        assert replayed["samples"] == direct["samples"]


class TestMetricsCmd:
    def test_report_from_log(self, capsys, tmp_path):
        run_cli(
            capsys, "run", "--agent", "random", "--track", "oval",
            "--seed", "2", "--out", str(tmp_path),
        )
        code, out, _ = run_cli(capsys, "metrics", "--log", str(tmp_path / "log.json"))
        assert code == EXIT_OK
        doc = json.loads(out)
        assert set(doc) == {"ECP", "ED", "AATS", "ADE", "TrA", "TrE", "MS", "flags"}
        saved = json.loads((tmp_path / "report.json").read_text())
        assert doc == saved["report"]

    def test_stationary_log_zero_ecp(self, capsys, tmp_path):
        import numpy as np

        from trackday.logs import TrajectoryLog

        n = 30
        zeros = np.zeros(n)
        log = TrajectoryLog(
            sim_time=np.arange(n) * 0.1, x=zeros.copy(), y=zeros.copy(),
            v=zeros.copy(), yaw=zeros.copy(), accel_cmd=zeros.copy(),
            steer_cmd=zeros.copy(), progress=zeros.copy(), lateral=zeros.copy(),
            wheels_out=np.zeros(n, dtype=np.int64),
            meta={"track": "oval", "laps_required": 3, "dt_env": 0.1,
                  "termination_reason": "insufficient_progress"},
        )
        log.save(tmp_path / "still.json")
        code, out, _ = run_cli(capsys, "metrics", "--log", str(tmp_path / "still.json"))
        assert code == EXIT_OK
        assert json.loads(out)["ECP"] == 0.0


class TestEval:
    def test_three_identical_deterministic_episodes(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "eval", "--agent", "random", "--track", "oval",
            "--seeds", "7,7,7", "--out", str(tmp_path),
        )
        assert code == EXIT_OK
        doc = json.loads(out)
        for key, stats in doc["metrics"].items():
            if stats["n"] > 1:
                assert stats["std"] == pytest.approx(0.0, abs=1e-12), key

    def test_aggregation_arithmetic(self):
        from trackday.cli import _aggregate

        reports = [{"ECP": 10.0}, {"ECP": 20.0}, {"ECP": 30.0}]
        summary = _aggregate(reports)
        assert summary["ECP"]["mean"] == pytest.approx(20.0)
        assert summary["ECP"]["std"] == pytest.approx(10.0)

    def test_incomplete_episodes_flagged(self, capsys):
        code, out, _ = run_cli(
            capsys, "eval", "--agent", "random", "--track", "oval", "--seeds", "1,2",
        )
        assert code == EXIT_OK
        doc = json.loads(out)
        assert "contains_incomplete_episodes" in doc["flags"]
        assert "TrE_may_be_misleading" in doc["flags"]

    def test_eval_matches_individual_runs(self, capsys):
        code, out, _ = run_cli(
            capsys, "eval", "--agent", "random", "--track", "oval", "--seeds", "11,12",
        )
        assert code == EXIT_OK
        battery = json.loads(out)
        for seed, per_episode in zip((11, 12), battery["per_episode"]):
            code, out, _ = run_cli(
                capsys, "run", "--agent", "random", "--track", "oval",
                "--seed", str(seed),
            )
            assert code == EXIT_OK
            single = json.loads(out)["report"]
            for key in ("ECP", "ED", "AATS", "ADE", "TrA", "TrE", "MS"):
                assert per_episode[key] == single[key], key


class TestPreeval:
    def test_zero_budget_fails_immediately(self, capsys):
        code, out, _ = run_cli(
            capsys, "preeval", "--agent", "random", "--track", "oval", "--budget", "0",
        )
        assert code == EXIT_DISQUALIFIED
        doc = json.loads(out)
        assert doc["pass"] is False
        assert doc["episodes_run"] == 0

    def test_random_agent_disqualified_small_budget(self, capsys):
        code, out, _ = run_cli(
            capsys, "preeval", "--agent", "random", "--track", "oval",
            "--budget", "60", "--seed", "3",
        )
        assert code == EXIT_DISQUALIFIED
        doc = json.loads(out)
        assert doc["pass"] is False
        assert doc["sim_time_used_s"] >= 60.0 - 0.1
        # only pass/fail and usage surface; no per-check detail
        assert set(doc) == {
            "pass", "agent", "track", "budget_s", "sim_time_used_s", "episodes_run",
        }


class TestConfigFiles:
    def test_episode_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "episode.json"
        cfg.write_text(json.dumps({"track": "scurve", "max_wall_steps": 20}))
        code, out, _ = run_cli(
            capsys, "run", "--agent", "random", "--seed", "1", "--config", str(cfg),
        )
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["track"] == "scurve"
        assert doc["steps"] <= 20

    def test_mpc_preset_flag(self, capsys, tmp_path):
        cfg = tmp_path / "episode.json"
        cfg.write_text(json.dumps({"max_wall_steps": 30}))
        code, out, _ = run_cli(
            capsys, "run", "--agent", "mpc", "--track", "oval",
            "--mpc-preset", "paper-estimates", "--config", str(cfg),
        )
        assert code == EXIT_OK
        assert json.loads(out)["steps"] <= 30

    def test_mpc_config_file(self, capsys, tmp_path):
        from trackday.controllers import mpc_preset

        mpc_cfg = tmp_path / "mpc.json"
        mpc_cfg.write_text(json.dumps(mpc_preset("matched").to_dict()))
        episode_cfg = tmp_path / "episode.json"
        episode_cfg.write_text(json.dumps({"max_wall_steps": 20}))
        code, _, _ = run_cli(
            capsys, "run", "--agent", "mpc", "--track", "oval",
            "--mpc-config", str(mpc_cfg), "--config", str(episode_cfg),
        )
        assert code == EXIT_OK


class TestRemoteRun:
    def test_remote_agent_scored_through_sockets(self, capsys, tmp_path):
        import json as json_mod
        import threading

        from trackday.net.client import ProtocolClient

        result = {}

        def harness():
            result["code"] = main(
                ["run", "--agent", "remote", "--track", "oval",
                 "--laps", "1", "--pacing", "lockstep",
                 "--remote-timeout", "60", "--out", str(tmp_path)]
            )

        thread = threading.Thread(target=harness)
        thread.start()
        # wait for the harness to announce its ports
        import time as time_mod

        deadline = time_mod.monotonic() + 20.0
        ports = None
        while time_mod.monotonic() < deadline and ports is None:
            captured = capsys.readouterr().out
            for line in captured.splitlines():
                if "waiting_for_remote_agent" in line:
                    ports = json_mod.loads(line)
            time_mod.sleep(0.05)
        assert ports is not None, "harness never announced ports"

        with ProtocolClient(
            host=ports["host"], control_port=ports["control_port"],
            action_port=ports["action_port"], subscribe_sensors=False,
        ) as client:
            # drive far enough to stall out: insufficient progress ends it
            reply = client.step(0.0, 0.0, n=150)
            assert reply["done"] is True
        thread.join(timeout=30)
        assert not thread.is_alive()
        assert result["code"] == EXIT_OK
        report = json_mod.loads((tmp_path / "report.json").read_text())
        assert report["agent"] == "remote"
        assert report["termination_reason"] == "insufficient_progress"


class TestServeConfig:
    def test_bad_pacing_rejected(self, capsys):
        code, _, _ = run_cli(capsys, "serve", "--pacing", "warp")
        assert code == EXIT_USAGE
