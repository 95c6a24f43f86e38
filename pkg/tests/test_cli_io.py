import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from adap.cli_io.checkpoint import (ConfigMismatchError, CorruptCheckpointError,
                                    load_checkpoint, save_checkpoint)
from adap.cli_io.config import (ExperimentConfig, ParseError, SchemaError,
                                config_from_dict, parse_config)
from adap.cli_io.interactive import (EpisodeAbortedError, InteractivePerceptron,
                                     interactive_perceive)
from adap.cli_io.report import write_report
from adap.diffusion.planner import sample
from adap.orchestrator import EpisodeOutcome, ExperimentReport, MethodResult, RoundRecord
from helpers import small_config, tiny_planner


class TestConfig:
    def test_empty_object_gives_full_defaults(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{}")
        cfg = parse_config(path)
        assert cfg.train.learning_rate == 5e-4
        assert cfg.train.timesteps == 100
        assert cfg.train.epochs == 3000
        assert cfg.train.batch_size == 256
        assert cfg.train.warmup_steps == 500
        assert cfg.max_rounds == 10
        assert cfg.success_threshold == 0.03
        assert cfg.horizon == 140 and cfg.priors.count == 6

    def test_task_defaults(self):
        cfg = config_from_dict({"task": "fishing"})
        assert cfg.horizon == 200 and cfg.priors.count == 8
        cfg = config_from_dict({"task": "curling"})
        assert cfg.horizon == 200 and cfg.priors.count == 6

    def test_unknown_key_rejected_by_name(self):
        with pytest.raises(SchemaError, match="'foo'"):
            config_from_dict({"foo": 1})
        with pytest.raises(SchemaError, match="env.bogus"):
            config_from_dict({"env": {"bogus": 2}})
        with pytest.raises(SchemaError, match="train."):
            config_from_dict({"train": {"learning_rat": 1e-3}})

    def test_nonpositive_threshold_rejected(self):
        with pytest.raises(SchemaError, match="success_threshold"):
            config_from_dict({"success_threshold": -1})

    def test_bad_values_rejected(self):
        with pytest.raises(SchemaError):
            config_from_dict({"task": "bowling"})
        with pytest.raises(SchemaError):
            config_from_dict({"methods": ["nope"]})
        with pytest.raises(SchemaError):
            config_from_dict({"goals": {"counts": [0, 10]}})
        with pytest.raises(SchemaError):
            config_from_dict({"sampler_seed_mode": "chaotic"})

    def test_parse_error_on_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            parse_config(path)
        with pytest.raises(ParseError):
            parse_config(tmp_path / "missing.json")

    def test_roundtrip_through_dict(self):
        cfg = config_from_dict({"seed": 7, "env": {"mu": 0.25}})
        again = config_from_dict(cfg.to_dict())
        assert again == cfg


class TestCheckpoint:
    def test_save_load_sample_bit_exact(self, tmp_path):
        planner = tiny_planner()
        before = sample(planner, [0.1, -0.2], seed=5)
        path = tmp_path / "p.ckpt"
        save_checkpoint(planner, path)
        loaded = load_checkpoint(path, expected_config=planner.config)
        after = sample(loaded, [0.1, -0.2], seed=5)
        assert np.array_equal(before.frames, after.frames)

    def test_truncated_file_detected(self, tmp_path):
        planner = tiny_planner()
        path = tmp_path / "p.ckpt"
        save_checkpoint(planner, path)
        blob = path.read_bytes()
        for cut in (3, 40, len(blob) - 17):
            bad = tmp_path / f"cut{cut}.ckpt"
            bad.write_bytes(blob[:cut])
            with pytest.raises(CorruptCheckpointError):
                load_checkpoint(bad)

    def test_wrong_magic_detected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTIT" + b"\x00" * 64)
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_config_mismatch_and_force(self, tmp_path):
        planner = tiny_planner()
        path = tmp_path / "p.ckpt"
        save_checkpoint(planner, path)
        other = small_config(epochs=999)
        with pytest.raises(ConfigMismatchError):
            load_checkpoint(path, expected_config=other)
        with pytest.warns(UserWarning, match="different configuration"):
            loaded = load_checkpoint(path, expected_config=other, force=True)
        assert loaded.horizon == planner.horizon


def fake_report(methods=("adap", "inn"), goals=4, max_rounds=5):
    rng = np.random.default_rng(0)
    out = {}
    for mi, m in enumerate(methods):
        episodes = []
        for g in range(goals):
            success = (g + mi) % 2 == 0
            rounds = [RoundRecord(condition=np.array([0.6, 0.0]), plan_hash="ab",
                                  result=np.array([0.61, 0.01]),
                                  true_error=np.array([0.01, 0.01]),
                                  perceived_error=np.array([0.01, 0.01]))
                      for _ in range(2)]
            episodes.append(EpisodeOutcome(
                goal=rng.uniform(-1, 1, 2), goal_estimate=np.zeros(2),
                rounds=rounds, success_round=2 if success else None,
                stage1_trials=6))
        out[m] = MethodResult(method=m, episodes=episodes, max_rounds=max_rounds)
    cfg = ExperimentConfig().to_dict()
    return ExperimentReport(config=cfg, seed=0, prior_count=6,
                            goals=rng.uniform(-1, 1, (goals, 2)), methods=out)


class TestReport:
    def test_csv_shape_and_monotone_rates(self, tmp_path):
        report = fake_report()
        paths = write_report(report, tmp_path)
        lines = paths["results"].read_text().strip().splitlines()
        assert lines[0] == "method,round,success_rate,mean_rounds_to_success"
        assert len(lines) == 1 + 2 * 5  # methods x max_rounds data rows
        by_method = {}
        for line in lines[1:]:
            method, rnd, rate, _ = line.split(",")
            by_method.setdefault(method, []).append(float(rate))
        for rates in by_method.values():
            assert all(0.0 <= r <= 1.0 for r in rates)
            assert all(a <= b for a, b in zip(rates, rates[1:]))

    def test_svg_well_formed_with_one_polyline_per_method(self, tmp_path):
        report = fake_report(methods=("adap", "inn", "inn_aligned"))
        paths = write_report(report, tmp_path)
        root = ET.fromstring(paths["curves"].read_text())
        polylines = [el for el in root.iter() if el.tag.endswith("polyline")]
        assert len(polylines) == 3

    def test_episodes_json_holds_outcomes_and_artifacts(self, tmp_path):
        report = fake_report()
        write_report(report, tmp_path, artifacts={"demos": "demos.json"})
        payload = json.loads((tmp_path / "episodes.json").read_text())
        assert payload["artifacts"]["demos"] == "demos.json"
        assert set(payload["methods"]) == {"adap", "inn"}
        ep = payload["methods"]["adap"]["episodes"][0]
        assert set(ep) == {"goal", "goal_estimate", "rounds", "success_round",
                           "stage1_trials"}


class TestInteractive:
    def scripted(self, answers):
        answers = iter(answers)
        return lambda prompt="": next(answers)

    def test_centimeter_conversion(self):
        got = interactive_perceive(input_fn=self.scripted(["1 -3"]), output_fn=lambda *_: None)
        assert got == pytest.approx([0.01, -0.03])

    def test_snapping_of_loose_input(self):
        got = interactive_perceive(input_fn=self.scripted(["0.7 17"]), output_fn=lambda *_: None)
        assert got == pytest.approx([0.01, 0.15])

    def test_reprompts_until_parseable(self):
        outputs = []
        got = interactive_perceive(input_fn=self.scripted(["nope", "1", "2 2"]),
                                   output_fn=outputs.append)
        assert got == pytest.approx([0.02, 0.02])
        assert any("could not parse" in str(o) for o in outputs)

    def test_abort_token(self):
        with pytest.raises(EpisodeAbortedError):
            interactive_perceive(input_fn=self.scripted(["q"]), output_fn=lambda *_: None)

    def test_perceptron_wrapper_shows_context(self):
        outputs = []
        p = InteractivePerceptron(input_fn=self.scripted(["5 0"]),
                                  output_fn=outputs.append)
        got = p.perceive_result([0.70, 0.0], [0.65, 0.0])
        assert got == pytest.approx([0.05, 0.0])
        assert any("+5.0 cm" in str(o) for o in outputs)
