import json
from decimal import Decimal

import pytest

from palps.dataset import RpfParams, SyntheticConfig, generate_synthetic
from palps.engine import (
    ActiveLearningEngine,
    EngineError,
    LogIntegrityError,
    RunConfig,
    RunLog,
    parse_method,
    read_run_log,
    replay,
    run,
    write_run_log,
)
from palps.oracle import OracleConfig, cost_baseline, cost_proposed
from palps.detector import SyntheticDetectorParams


def small_manifest(n=60, seed=1):
    return generate_synthetic(
        SyntheticConfig(num_images=n, objects_per_image=(2, 5), min_center_separation=60.0),
        seed=seed,
    )


def small_config(method="ent_mev", **overrides):
    defaults = dict(
        method=method,
        seed=42,
        b_w=10,
        b_s=5,
        initial_labeled=8,
        budget=45,
        test_fraction=0.25,
        rpf=RpfParams(epsilon=60.0, alpha=8000.0),
        detector=SyntheticDetectorParams(skill_tau=30.0),
        oracle=OracleConfig(mode="simulated", click_jitter_frac=0.1, seed=42),
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


class TestParseMethod:
    def test_baselines(self):
        assert parse_method("rand") == ("rand", None)
        assert parse_method("ent") == ("ent", None)

    def test_combined(self):
        assert parse_method("lc_mv") == ("lc", "mv")
        assert parse_method("rand_mev") == ("rand", "mev")
        assert parse_method("mar_me") == ("mar", "me")

    def test_rejects_unknown(self):
        for bad in ("mv", "foo", "lc_foo", "mev_lc", ""):
            with pytest.raises(ValueError):
                parse_method(bad)


class TestRunConfig:
    def test_point_method_requires_rpf(self):
        with pytest.raises(ValueError, match="rpf"):
            RunConfig(method="lc_mv", seed=1, rpf=None)

    def test_roundtrip_via_dict(self):
        cfg = small_config()
        assert RunConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()

    def test_unknown_keys_rejected(self):
        d = small_config().to_dict()
        d["typo"] = 1
        with pytest.raises(ValueError, match="typo"):
            RunConfig.from_dict(d)


class TestInitialize:
    def test_sizes_and_split(self):
        manifest = small_manifest(100)
        cfg = small_config(initial_labeled=50, test_fraction=0.0)
        engine = ActiveLearningEngine(cfg, manifest)
        state = engine.initialize()
        assert len(state.labeled) == 50
        assert len(state.unlabeled) == 50
        assert len(state.weak) == 0

    def test_same_seed_same_split(self):
        manifest = small_manifest(80)
        a = ActiveLearningEngine(small_config(), manifest)
        b = ActiveLearningEngine(small_config(), manifest)
        assert a.initialize().labeled == b.initialize().labeled
        assert a.test_ids == b.test_ids

    def test_initial_larger_than_pool_rejected(self):
        manifest = small_manifest(20)
        cfg = small_config(initial_labeled=19, test_fraction=0.25)
        with pytest.raises(EngineError):
            ActiveLearningEngine(cfg, manifest).initialize()

    def test_whole_pool_labeled_ends_immediately(self):
        manifest = small_manifest(30)
        cfg = small_config(initial_labeled=30, test_fraction=0.0)
        log = run(cfg, manifest)
        assert log.episodes == []


class TestEpisodeTransitions:
    def test_two_stage_schedule(self):
        manifest = small_manifest(80)
        cfg = small_config(b_w=10, b_s=5)
        log = run(cfg, manifest)
        first = log.episodes[0]
        assert len(first.queried_weak) == 10
        assert len(first.queried_strong) == 5
        assert first.weak_size == 5  # leftovers persist
        second = log.episodes[1]
        assert second.weak_size == 10  # 5 + 10 - 5

    def test_budget_decrement_and_guard(self):
        manifest = small_manifest(200, seed=3)
        cfg = small_config(budget=2 * 15, initial_labeled=8)
        log = run(cfg, manifest)
        assert len(log.episodes) == 2
        assert [e.budget_remaining for e in log.episodes] == [15, 0]

    def test_partition_conservation_every_episode(self):
        manifest = small_manifest(70)
        cfg = small_config()
        log = run(cfg, manifest)
        pool = 70 - len(log.test_ids)
        for entry in log.episodes:
            assert entry.labeled_size + entry.weak_size + entry.unlabeled_size == pool

    def test_monotone_pools(self):
        log = run(small_config(), small_manifest(70))
        labeled = [e.labeled_size for e in log.episodes]
        unlabeled = [e.unlabeled_size for e in log.episodes]
        assert labeled == sorted(labeled)
        assert unlabeled == sorted(unlabeled, reverse=True)

    def test_strong_queries_come_from_weak_pool(self):
        log = run(small_config(), small_manifest(70))
        weakened: set[str] = set()
        for entry in log.episodes:
            weakened.update(entry.queried_weak)
            assert set(entry.queried_strong) <= weakened

    def test_ledger_matches_closed_form(self):
        log = run(small_config(), small_manifest(70))
        for entry in log.episodes:
            ledger = entry.ledger
            want = cost_proposed(
                ledger["images_weak"], ledger["objects_weak"], ledger["objects_strong"]
            )
            assert Decimal(ledger["seconds_total"]) == want

    def test_baseline_flow_skips_weak_pool(self):
        cfg = small_config(method="ent", rpf=None)
        log = run(cfg, small_manifest(70))
        for entry in log.episodes:
            assert entry.queried_weak == ()
            assert entry.weak_size == 0
            assert len(entry.queried_strong) <= cfg.b_w + cfg.b_s
            ledger = entry.ledger
            assert Decimal(ledger["seconds_total"]) == cost_baseline(
                ledger["images_strong"], ledger["objects_strong"]
            )

    def test_random_method_runs(self):
        cfg = small_config(method="rand", rpf=None)
        log = run(cfg, small_manifest(70))
        assert log.episodes
        cfg2 = small_config(method="rand_mev")
        assert run(cfg2, small_manifest(70)).episodes

    def test_episode_cap(self):
        cfg = small_config(episode_cap=1, budget=1000)
        log = run(cfg, small_manifest(100))
        assert len(log.episodes) == 1

    def test_skill_recorded_and_monotone(self):
        log = run(small_config(), small_manifest(70))
        skills = [e.skill for e in log.episodes]
        assert all(s is not None for s in skills)
        assert skills == sorted(skills)


class TestDeterminism:
    def test_same_seed_bit_identical_logs(self):
        manifest = small_manifest(70)
        lines_a = run(small_config(), manifest).to_lines()
        lines_b = run(small_config(), manifest).to_lines()
        assert lines_a == lines_b

    def test_different_seed_differs(self):
        manifest = small_manifest(70)
        a = run(small_config(), manifest).to_lines()
        b = run(small_config(seed=43, oracle=OracleConfig(seed=43, click_jitter_frac=0.1)), manifest).to_lines()
        assert a != b


class TestRunLogIO:
    def test_roundtrip_through_file(self, tmp_path):
        manifest = small_manifest(70)
        log = run(small_config(), manifest)
        path = tmp_path / "run.ndjson"
        write_run_log(path, log)
        again = read_run_log(path)
        assert again.to_lines() == log.to_lines()

    def test_tampered_line_detected(self, tmp_path):
        manifest = small_manifest(70)
        log = run(small_config(), manifest)
        path = tmp_path / "run.ndjson"
        write_run_log(path, log)
        lines = path.read_text().splitlines()
        doc = json.loads(lines[1])
        doc["labeled_size"] += 1
        lines[1] = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(LogIntegrityError, match="checksum"):
            read_run_log(path)

    def test_header_must_come_first(self):
        with pytest.raises(LogIntegrityError):
            RunLog.from_lines(['{"type":"episode"}'])


class TestReplay:
    def test_replay_reconstructs_final_state(self):
        manifest = small_manifest(70)
        cfg = small_config()
        engine = ActiveLearningEngine(cfg, manifest)
        log = engine.run()
        live = engine.final_state
        replayed = replay(log, manifest)
        assert replayed.to_dict() == live.to_dict()

    def test_replay_baseline_run(self):
        manifest = small_manifest(70)
        cfg = small_config(method="lc", rpf=None)
        engine = ActiveLearningEngine(cfg, manifest)
        log = engine.run()
        assert replay(log, manifest).to_dict() == engine.final_state.to_dict()

    def test_truncated_log_replays_prefix(self):
        manifest = small_manifest(70)
        engine = ActiveLearningEngine(small_config(), manifest)
        log = engine.run()
        truncated = RunLog(
            config=log.config,
            manifest_sha256=log.manifest_sha256,
            initial_labeled_ids=log.initial_labeled_ids,
            test_ids=log.test_ids,
            episodes=log.episodes[:1],
        )
        state = replay(truncated, manifest)
        assert len(state.labeled) == log.episodes[0].labeled_size

    def test_wrong_manifest_rejected(self):
        manifest = small_manifest(70)
        log = run(small_config(), manifest)
        other = small_manifest(70, seed=2)
        with pytest.raises(LogIntegrityError, match="manifest"):
            replay(log, other)


class TestResume:
    def test_resume_reproduces_uninterrupted_run(self):
        manifest = small_manifest(70)
        full = ActiveLearningEngine(small_config(), manifest).run()
        assert len(full.episodes) >= 2
        truncated = RunLog(
            config=full.config,
            manifest_sha256=full.manifest_sha256,
            initial_labeled_ids=full.initial_labeled_ids,
            test_ids=full.test_ids,
            episodes=full.episodes[:1],
        )
        resumed = ActiveLearningEngine(small_config(), manifest).resume(truncated)
        assert resumed.to_lines() == full.to_lines()

    def test_resume_of_complete_run_is_idempotent(self):
        manifest = small_manifest(70)
        full = ActiveLearningEngine(small_config(), manifest).run()
        again = ActiveLearningEngine(small_config(), manifest).resume(full)
        assert again.to_lines() == full.to_lines()

    def test_resume_rejects_config_mismatch(self):
        manifest = small_manifest(70)
        full = ActiveLearningEngine(small_config(), manifest).run()
        other = ActiveLearningEngine(small_config(seed=43, oracle=OracleConfig(seed=43)), manifest)
        with pytest.raises(LogIntegrityError, match="config"):
            other.resume(full)


class TestWallClockExcluded:
    def test_wall_clock_not_serialized(self):
        manifest = small_manifest(70)
        log = run(small_config(), manifest)
        assert log.episodes[0].wall_clock_seconds is not None
        assert "wall_clock" not in log.episodes[0].to_json_line()
