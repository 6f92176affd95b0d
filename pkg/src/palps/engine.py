"""The active learning loop: pool partition maintenance, per-episode
weak/strong querying, retraining, budget accounting and a replayable run log.

One engine mutates one run at a time (single writer). Scoring inside an
episode iterates images in sorted-id order and every stochastic draw comes
from a named stream, so a run is bit-reproducible for a fixed seed.

Two flows share the loop:

* two-stage (point-supervised) methods, named ``{stage1}_{stage2}`` such as
  ``lc_mv``: each episode moves ``b_w`` images from the unlabeled pool to the
  weak pool via the stage-1 (baseline) scorer and click annotation, then
  ``b_s`` images from the *whole* weak pool to the labeled pool via the
  stage-2 scorer over click-filtered proposals (leftovers persist in the
  weak pool);
* one-stage baselines (``rand``/``lc``/``mar``/``ent``): each episode moves
  ``b_w + b_s`` images straight from unlabeled to labeled, so per-episode
  image throughput matches the two-stage flow, charged with the
  full-supervision cost model.

The budget is counted in images and decremented by ``b_w + b_s`` per episode
in both flows (floored at zero); annotation seconds live in the parallel
read-only cost ledger and are never conflated with the budget.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Callable, Sequence

from .dataset import (
    DatasetManifest,
    ImageRecord,
    RpfParams,
    box_to_dict,
    manifest_to_dict,
)
from .detector import Detector, DetectorOutput, SyntheticDetector, SyntheticDetectorParams
from .evaluation import evaluate_detections
from .geometry import BoundingBox, ClickPoint
from .oracle import CostLedger, Oracle, OracleConfig, SimulatedOracle
from .rng import stream
from .sampling import (
    BASELINE_METHODS,
    POINT_METHODS,
    UncertaintyScore,
    WeakLabelSet,
    baseline_entropy,
    baseline_least_confidence,
    baseline_margin,
    max_ent_var,
    max_entropy,
    max_variance,
    rpf,
    select_top_k,
)

log = logging.getLogger(__name__)

RUN_LOG_FORMAT_VERSION = 1


class EngineError(RuntimeError):
    pass


class InvariantViolation(EngineError):
    """A pool-partition or budget invariant failed; indicates a bug."""


class LogIntegrityError(EngineError):
    """A run-log line failed its checksum or does not match the manifest."""


def parse_method(name: str) -> tuple[str, str | None]:
    """Split a method name into (stage-1 scorer, stage-2 scorer or None).

    Bare baseline names (``rand``/``lc``/``mar``/``ent``) run one-stage;
    combined names like ``lc_mv`` pair a baseline stage-1 with a
    point-supervised stage-2 (``mv``/``me``/``mev``).
    """
    if name in BASELINE_METHODS:
        return name, None
    if "_" in name:
        stage1, _, stage2 = name.partition("_")
        if stage1 in BASELINE_METHODS and stage2 in POINT_METHODS:
            return stage1, stage2
    raise ValueError(
        f"unknown method {name!r}; expected one of {BASELINE_METHODS} or "
        f"'{{{'|'.join(BASELINE_METHODS)}}}_{{{'|'.join(POINT_METHODS)}}}'"
    )


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def manifest_digest(manifest: DatasetManifest) -> str:
    return sha256_hex(canonical_json(manifest_to_dict(manifest)))


@dataclass
class RunConfig:
    """Everything a run needs; fully echoed into the run-log header."""

    method: str
    seed: int
    b_w: int = 50
    b_s: int = 25
    initial_labeled: int = 50
    budget: int = 300
    episode_cap: int | None = None
    test_fraction: float = 0.4
    dataset: str | None = None
    rpf: RpfParams | None = None
    detector: SyntheticDetectorParams = field(default_factory=SyntheticDetectorParams)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    lambda1: float = 1.0
    lambda2: float = 4.0
    entropy_aggregate: str = "sum"

    def __post_init__(self) -> None:
        self.stage1, self.stage2 = parse_method(self.method)
        if min(self.b_w, self.b_s, self.initial_labeled, self.budget) < 1:
            raise ValueError("batch sizes, initial pool and budget must be positive")
        if self.episode_cap is not None and self.episode_cap < 1:
            raise ValueError("episode_cap must be positive when set")
        if not (0.0 <= self.test_fraction < 1.0):
            raise ValueError("test_fraction must be in [0, 1)")
        if self.stage2 is not None and self.rpf is None:
            raise ValueError(f"method {self.method!r} needs rpf parameters (epsilon, alpha)")

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "seed": self.seed,
            "b_w": self.b_w,
            "b_s": self.b_s,
            "initial_labeled": self.initial_labeled,
            "budget": self.budget,
            "episode_cap": self.episode_cap,
            "test_fraction": self.test_fraction,
            "dataset": self.dataset,
            "rpf": None if self.rpf is None else {"epsilon": self.rpf.epsilon, "alpha": self.rpf.alpha},
            "detector": asdict(self.detector),
            "oracle": asdict(self.oracle),
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "entropy_aggregate": self.entropy_aggregate,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        rpf_d = d.get("rpf")
        det_d = d.get("detector") or {}
        orc_d = d.get("oracle") or {}
        known = {
            "method", "seed", "b_w", "b_s", "initial_labeled", "budget",
            "episode_cap", "test_fraction", "dataset", "lambda1", "lambda2",
            "entropy_aggregate",
        }
        unknown = set(d) - known - {"rpf", "detector", "oracle"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: d[k] for k in known if k in d}
        return cls(
            rpf=None if rpf_d is None else RpfParams(**rpf_d),
            detector=SyntheticDetectorParams(**det_d),
            oracle=OracleConfig(**orc_d),
            **kwargs,
        )


@dataclass
class PoolState:
    """The disjoint labeled / weak / unlabeled partition plus budget."""

    labeled: set[str]
    weak: set[str]
    unlabeled: set[str]
    weak_labels: dict[str, WeakLabelSet]
    strong_labels: dict[str, tuple[BoundingBox, ...]]
    budget: int

    def sizes(self) -> dict[str, int]:
        return {"labeled": len(self.labeled), "weak": len(self.weak), "unlabeled": len(self.unlabeled)}

    def to_dict(self) -> dict:
        return {
            "labeled": sorted(self.labeled),
            "weak": sorted(self.weak),
            "unlabeled": sorted(self.unlabeled),
            "budget": self.budget,
            "weak_labels": {
                i: [[c.x, c.y] for c in self.weak_labels[i].clicks] for i in sorted(self.weak_labels)
            },
            "strong_labels": {
                i: [box_to_dict(b) for b in self.strong_labels[i]] for i in sorted(self.strong_labels)
            },
        }

    def validate(self, universe: set[str]) -> None:
        if self.labeled & self.weak or self.labeled & self.unlabeled or self.weak & self.unlabeled:
            raise InvariantViolation("pools are not pairwise disjoint")
        if self.labeled | self.weak | self.unlabeled != universe:
            raise InvariantViolation("pool union does not cover the dataset")
        if self.budget < 0:
            raise InvariantViolation("budget went negative")
        missing_weak = [i for i in self.weak if i not in self.weak_labels]
        if missing_weak:
            raise InvariantViolation(f"weak-pool members without weak labels: {missing_weak[:3]}")
        missing_strong = [i for i in self.labeled if i not in self.strong_labels]
        if missing_strong:
            raise InvariantViolation(f"labeled-pool members without strong labels: {missing_strong[:3]}")


@dataclass
class EpisodeLog:
    """Append-only record of one episode; sufficient to replay transitions."""

    episode: int
    method: str
    queried_weak: tuple[str, ...]
    queried_strong: tuple[str, ...]
    stage1_scores: dict[str, float]
    stage2_scores: dict[str, float]
    weak_labels: dict[str, list[list[float]]]
    strong_labels: dict[str, list[dict]]
    labeled_size: int
    weak_size: int
    unlabeled_size: int
    budget_remaining: int
    ledger: dict
    eval: dict
    skill: float | None
    # Wall-clock duration is diagnostic only: it is never serialized, so
    # same-seed runs produce byte-identical logs.
    wall_clock_seconds: float | None = None

    def to_dict(self) -> dict:
        return {
            "type": "episode",
            "episode": self.episode,
            "method": self.method,
            "queried_weak": list(self.queried_weak),
            "queried_strong": list(self.queried_strong),
            "stage1_scores": self.stage1_scores,
            "stage2_scores": self.stage2_scores,
            "weak_labels": self.weak_labels,
            "strong_labels": self.strong_labels,
            "labeled_size": self.labeled_size,
            "weak_size": self.weak_size,
            "unlabeled_size": self.unlabeled_size,
            "budget_remaining": self.budget_remaining,
            "ledger": self.ledger,
            "eval": self.eval,
            "skill": self.skill,
        }

    def to_json_line(self) -> str:
        body = self.to_dict()
        body["checksum"] = sha256_hex(canonical_json(body))
        return canonical_json(body)

    @classmethod
    def from_json_line(cls, line: str) -> "EpisodeLog":
        body = json.loads(line)
        claimed = body.pop("checksum", None)
        actual = sha256_hex(canonical_json(body))
        if claimed != actual:
            raise LogIntegrityError(f"episode {body.get('episode')}: checksum mismatch")
        body.pop("type", None)
        return cls(
            episode=body["episode"],
            method=body["method"],
            queried_weak=tuple(body["queried_weak"]),
            queried_strong=tuple(body["queried_strong"]),
            stage1_scores=body["stage1_scores"],
            stage2_scores=body["stage2_scores"],
            weak_labels=body["weak_labels"],
            strong_labels=body["strong_labels"],
            labeled_size=body["labeled_size"],
            weak_size=body["weak_size"],
            unlabeled_size=body["unlabeled_size"],
            budget_remaining=body["budget_remaining"],
            ledger=body["ledger"],
            eval=body["eval"],
            skill=body["skill"],
        )


@dataclass
class RunLog:
    """Header plus episode lines; the unit the log file stores."""

    config: dict
    manifest_sha256: str
    initial_labeled_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    episodes: list[EpisodeLog]

    def header_dict(self) -> dict:
        return {
            "type": "header",
            "format_version": RUN_LOG_FORMAT_VERSION,
            "config": self.config,
            "manifest_sha256": self.manifest_sha256,
            "initial_labeled_ids": list(self.initial_labeled_ids),
            "test_ids": list(self.test_ids),
        }

    def to_lines(self) -> list[str]:
        return [canonical_json(self.header_dict())] + [e.to_json_line() for e in self.episodes]

    @classmethod
    def from_lines(cls, lines: Sequence[str]) -> "RunLog":
        entries = [line for line in lines if line.strip()]
        if not entries:
            raise LogIntegrityError("empty run log")
        header = json.loads(entries[0])
        if header.get("type") != "header":
            raise LogIntegrityError("first log line is not a header")
        if header.get("format_version") != RUN_LOG_FORMAT_VERSION:
            raise LogIntegrityError(f"unsupported log format_version {header.get('format_version')!r}")
        episodes = [EpisodeLog.from_json_line(line) for line in entries[1:]]
        return cls(
            config=header["config"],
            manifest_sha256=header["manifest_sha256"],
            initial_labeled_ids=tuple(header["initial_labeled_ids"]),
            test_ids=tuple(header["test_ids"]),
            episodes=episodes,
        )


def write_run_log(path: str | Path, run_log: RunLog) -> None:
    Path(path).write_text("\n".join(run_log.to_lines()) + "\n", encoding="utf-8")


def read_run_log(path: str | Path) -> RunLog:
    return RunLog.from_lines(Path(path).read_text(encoding="utf-8").splitlines())


class ActiveLearningEngine:
    """Drives one run. Construct, then call :meth:`run`."""

    def __init__(
        self,
        config: RunConfig,
        manifest: DatasetManifest,
        detector: Detector | None = None,
        oracle: Oracle | None = None,
        test_ids: Sequence[str] | None = None,
    ) -> None:
        self.config = config
        self.manifest = manifest
        self.by_id = manifest.by_id()
        self.detector = detector if detector is not None else SyntheticDetector(config.detector, seed=config.seed)
        self.oracle = oracle if oracle is not None else SimulatedOracle(config.oracle)
        all_ids = sorted(self.by_id)
        if test_ids is not None:
            self.test_ids = tuple(sorted(test_ids))
        elif config.test_fraction > 0:
            rng = stream(config.seed, "split")
            n_test = int(round(config.test_fraction * len(all_ids)))
            order = rng.permutation(len(all_ids))
            self.test_ids = tuple(sorted(all_ids[i] for i in order[:n_test]))
        else:
            self.test_ids = ()
        test_set = set(self.test_ids)
        unknown = test_set - set(all_ids)
        if unknown:
            raise EngineError(f"test ids not in manifest: {sorted(unknown)[:3]}")
        self.pool_ids = tuple(i for i in all_ids if i not in test_set)
        self.universe = set(self.pool_ids)
        self.model: Any = None
        self.ledger = CostLedger()
        self.initial_ids: tuple[str, ...] = ()

    # -- setup ---------------------------------------------------------------

    def initialize(self) -> PoolState:
        """Seeded uniform initial split; trains the detector once on it."""
        cfg = self.config
        if cfg.initial_labeled > len(self.pool_ids):
            raise EngineError(
                f"initial_labeled={cfg.initial_labeled} exceeds the {len(self.pool_ids)}-image pool"
            )
        rng = stream(cfg.seed, "init")
        order = rng.permutation(len(self.pool_ids))
        initial = tuple(sorted(self.pool_ids[i] for i in order[: cfg.initial_labeled]))
        self.initial_ids = initial
        state = PoolState(
            labeled=set(initial),
            weak=set(),
            unlabeled=set(self.pool_ids) - set(initial),
            weak_labels={},
            strong_labels={i: tuple(self.by_id[i].objects) for i in initial},
            budget=cfg.budget,
        )
        state.validate(self.universe)
        self._retrain(state)
        return state

    def _retrain(self, state: PoolState) -> None:
        labeled = [(self.by_id[i], state.strong_labels[i]) for i in sorted(state.labeled)]
        self.model = self.detector.train(labeled)

    # -- scoring ---------------------------------------------------------------

    def _stage1_scores(self, ids: Sequence[str]) -> list[UncertaintyScore]:
        method = self.config.stage1
        scores = []
        for image_id in sorted(ids):
            if method == "rand":
                scores.append(UncertaintyScore(image_id=image_id, value=0.0, method="rand"))
                continue
            out = self.detector.detect(self.model, self.by_id[image_id])
            scores.append(self._baseline_score(method, out))
        return scores

    def _baseline_score(self, method: str, out: DetectorOutput) -> UncertaintyScore:
        if method == "lc":
            return baseline_least_confidence(out)
        if method == "mar":
            return baseline_margin(out)
        if method == "ent":
            return baseline_entropy(out, aggregate=self.config.entropy_aggregate)
        raise EngineError(f"unsupported stage-1 method {method!r}")

    def _stage2_scores(self, state: PoolState, ids: Sequence[str]) -> list[UncertaintyScore]:
        method = self.config.stage2
        assert method is not None and self.config.rpf is not None
        scores = []
        for image_id in sorted(ids):
            out = self.detector.detect(self.model, self.by_id[image_id])
            filtered = rpf(out.proposals, state.weak_labels[image_id], self.config.rpf)
            if method == "mv":
                scores.append(max_variance(filtered))
            elif method == "me":
                scores.append(max_entropy(filtered))
            else:
                scores.append(max_ent_var(filtered, self.config.lambda1, self.config.lambda2))
        return scores

    # -- annotation validation --------------------------------------------------

    def _check_clicks(self, image: ImageRecord, weak: WeakLabelSet) -> None:
        for c in weak.clicks:
            if not (0 <= c.x <= image.width and 0 <= c.y <= image.height):
                raise EngineError(f"oracle click {c} outside image {image.id!r}")

    def _check_boxes(self, image: ImageRecord, boxes: Sequence[BoundingBox]) -> None:
        for b in boxes:
            if b.x_max > image.width or b.y_max > image.height:
                raise EngineError(f"oracle box {b} outside image {image.id!r}")

    # -- the episode --------------------------------------------------------------

    def run_episode(self, state: PoolState, episode: int) -> EpisodeLog:
        if state.budget <= 0 or not state.unlabeled:
            raise EngineError("run_episode called with an exhausted budget or pool")
        started = time.monotonic()
        if self.config.stage2 is None:
            log_entry = self._baseline_episode(state, episode)
        else:
            log_entry = self._two_stage_episode(state, episode)
        log_entry.wall_clock_seconds = time.monotonic() - started
        return log_entry

    def _two_stage_episode(self, state: PoolState, episode: int) -> EpisodeLog:
        cfg = self.config
        stage1 = self._stage1_scores(sorted(state.unlabeled))
        n_weak = min(cfg.b_w, len(state.unlabeled))
        queried_weak = select_top_k(stage1, n_weak, rng=stream(cfg.seed, "select", episode, "stage1"))
        weak_images = [self.by_id[i] for i in queried_weak]
        weak_annotations = self.oracle.annotate_type1_batch(weak_images)
        n_clicks = 0
        for image in weak_images:
            weak = weak_annotations[image.id]
            self._check_clicks(image, weak)
            state.weak_labels[image.id] = weak
            n_clicks += len(weak.clicks)
        state.unlabeled -= set(queried_weak)
        state.weak |= set(queried_weak)
        state.validate(self.universe)
        self.ledger = self.ledger.charge_weak_batch(len(queried_weak), n_clicks)

        stage2 = self._stage2_scores(state, sorted(state.weak))
        n_strong = min(cfg.b_s, len(state.weak))
        queried_strong = select_top_k(stage2, n_strong, rng=stream(cfg.seed, "select", episode, "stage2"))
        strong_items = [(self.by_id[i], state.weak_labels[i]) for i in queried_strong]
        strong_annotations = self.oracle.annotate_type2_batch(strong_items)
        n_boxes = 0
        for image, _ in strong_items:
            boxes = tuple(strong_annotations[image.id])
            self._check_boxes(image, boxes)
            state.strong_labels[image.id] = boxes
            n_boxes += len(boxes)
        state.weak -= set(queried_strong)
        state.labeled |= set(queried_strong)
        state.budget = max(0, state.budget - cfg.b_w - cfg.b_s)
        state.validate(self.universe)
        self.ledger = self.ledger.charge_strong_batch(len(queried_strong), n_boxes)

        self._retrain(state)
        return self._episode_log(
            state,
            episode,
            queried_weak=tuple(queried_weak),
            queried_strong=tuple(queried_strong),
            stage1_scores={s.image_id: s.value for s in stage1},
            stage2_scores={s.image_id: s.value for s in stage2},
            weak_labels={
                i: [[c.x, c.y] for c in state.weak_labels[i].clicks] for i in queried_weak
            },
            strong_labels={
                i: [box_to_dict(b) for b in state.strong_labels[i]] for i in queried_strong
            },
        )

    def _baseline_episode(self, state: PoolState, episode: int) -> EpisodeLog:
        cfg = self.config
        stage1 = self._stage1_scores(sorted(state.unlabeled))
        n_query = min(cfg.b_w + cfg.b_s, len(state.unlabeled))
        queried = select_top_k(stage1, n_query, rng=stream(cfg.seed, "select", episode, "stage1"))
        images = [self.by_id[i] for i in queried]
        annotations = self.oracle.annotate_direct_batch(images)
        n_boxes = 0
        for image in images:
            boxes = tuple(annotations[image.id])
            self._check_boxes(image, boxes)
            state.strong_labels[image.id] = boxes
            n_boxes += len(boxes)
        state.unlabeled -= set(queried)
        state.labeled |= set(queried)
        state.budget = max(0, state.budget - cfg.b_w - cfg.b_s)
        state.validate(self.universe)
        self.ledger = self.ledger.charge_baseline_batch(len(queried), n_boxes)

        self._retrain(state)
        return self._episode_log(
            state,
            episode,
            queried_weak=(),
            queried_strong=tuple(queried),
            stage1_scores={s.image_id: s.value for s in stage1},
            stage2_scores={},
            weak_labels={},
            strong_labels={i: [box_to_dict(b) for b in state.strong_labels[i]] for i in queried},
        )

    def _episode_log(self, state: PoolState, episode: int, **kwargs) -> EpisodeLog:
        return EpisodeLog(
            episode=episode,
            method=self.config.method,
            labeled_size=len(state.labeled),
            weak_size=len(state.weak),
            unlabeled_size=len(state.unlabeled),
            budget_remaining=state.budget,
            ledger=self.ledger.to_dict(),
            eval=self.evaluate(),
            skill=getattr(self.model, "skill", None),
            **kwargs,
        )

    def evaluate(self) -> dict:
        """AP snapshot on the held-out split with the current model."""
        if not self.test_ids:
            return {"map_at_50": None, "total_gt": 0, "total_detections": 0, "tp": 0, "fp": 0}
        per_image = []
        for image_id in self.test_ids:
            image = self.by_id[image_id]
            out = self.detector.detect(self.model, image)
            per_image.append((out.detections, image.objects))
        return evaluate_detections(per_image)

    # -- whole run -----------------------------------------------------------------

    def run(self, sink: Callable[[EpisodeLog], None] | None = None) -> RunLog:
        state = self.initialize()
        return self._loop(state, [], sink)

    def resume(self, run_log: RunLog, sink: Callable[[EpisodeLog], None] | None = None) -> RunLog:
        """Continue an interrupted run from its log.

        The pool state is reconstructed by replay, the ledger restored from
        the last episode, and the detector retrained on the replayed labeled
        pool. Because every stochastic draw is keyed by named streams rather
        than call order, the continued episodes are bit-identical to the ones
        an uninterrupted run would have produced.
        """
        if run_log.config != self.config.to_dict():
            raise LogIntegrityError("resume config differs from the logged config")
        if tuple(run_log.test_ids) != self.test_ids:
            raise LogIntegrityError("resume test split differs from the logged split")
        state = replay(run_log, self.manifest)
        self.initial_ids = tuple(run_log.initial_labeled_ids)
        if run_log.episodes:
            self.ledger = CostLedger.from_dict(run_log.episodes[-1].ledger)
        self._retrain(state)
        return self._loop(state, list(run_log.episodes), sink)

    def _loop(
        self,
        state: PoolState,
        episodes: list[EpisodeLog],
        sink: Callable[[EpisodeLog], None] | None,
    ) -> RunLog:
        episode = len(episodes) + 1
        while state.budget > 0 and state.unlabeled:
            if self.config.episode_cap is not None and episode > self.config.episode_cap:
                break
            entry = self.run_episode(state, episode)
            episodes.append(entry)
            if sink is not None:
                sink(entry)
            log.info(
                "episode %d: labeled=%d weak=%d unlabeled=%d budget=%d map=%s (%.2fs)",
                episode, entry.labeled_size, entry.weak_size, entry.unlabeled_size,
                entry.budget_remaining, entry.eval.get("map_at_50"), entry.wall_clock_seconds or 0.0,
            )
            episode += 1
        self.final_state = state
        return RunLog(
            config=self.config.to_dict(),
            manifest_sha256=manifest_digest(self.manifest),
            initial_labeled_ids=self.initial_ids,
            test_ids=self.test_ids,
            episodes=episodes,
        )


def run(
    config: RunConfig,
    manifest: DatasetManifest,
    detector: Detector | None = None,
    oracle: Oracle | None = None,
    test_ids: Sequence[str] | None = None,
    sink: Callable[[EpisodeLog], None] | None = None,
) -> RunLog:
    """Run the loop to completion (budget exhausted, pool empty, or cap)."""
    return ActiveLearningEngine(config, manifest, detector, oracle, test_ids).run(sink)


def replay(run_log: RunLog, manifest: DatasetManifest) -> PoolState:
    """Reconstruct the final pool state from a run log without re-running
    any component. Checksums are verified at parse time; the manifest hash
    and every pool invariant are verified here."""
    if run_log.manifest_sha256 != manifest_digest(manifest):
        raise LogIntegrityError("run log does not match this manifest")
    config = RunConfig.from_dict(run_log.config)
    by_id = manifest.by_id()
    universe = set(by_id) - set(run_log.test_ids)
    missing = set(run_log.initial_labeled_ids) - universe
    if missing:
        raise LogIntegrityError(f"initial ids not in the learning pool: {sorted(missing)[:3]}")
    state = PoolState(
        labeled=set(run_log.initial_labeled_ids),
        weak=set(),
        unlabeled=universe - set(run_log.initial_labeled_ids),
        weak_labels={},
        strong_labels={i: tuple(by_id[i].objects) for i in run_log.initial_labeled_ids},
        budget=config.budget,
    )
    state.validate(universe)
    for entry in run_log.episodes:
        for image_id in entry.queried_weak:
            if image_id not in state.unlabeled:
                raise LogIntegrityError(f"episode {entry.episode}: {image_id!r} not unlabeled")
            clicks = tuple(ClickPoint(x, y) for x, y in entry.weak_labels[image_id])
            state.weak_labels[image_id] = WeakLabelSet(image_id=image_id, clicks=clicks)
            state.unlabeled.discard(image_id)
            state.weak.add(image_id)
        for image_id in entry.queried_strong:
            boxes = tuple(
                BoundingBox(b["x_min"], b["y_min"], b["x_max"], b["y_max"])
                for b in entry.strong_labels[image_id]
            )
            state.strong_labels[image_id] = boxes
            if config.stage2 is None:
                if image_id not in state.unlabeled:
                    raise LogIntegrityError(f"episode {entry.episode}: {image_id!r} not unlabeled")
                state.unlabeled.discard(image_id)
            else:
                if image_id not in state.weak:
                    raise LogIntegrityError(f"episode {entry.episode}: {image_id!r} not weak-labeled")
                state.weak.discard(image_id)
            state.labeled.add(image_id)
        state.budget = entry.budget_remaining
        state.validate(universe)
        if (len(state.labeled), len(state.weak), len(state.unlabeled)) != (
            entry.labeled_size, entry.weak_size, entry.unlabeled_size,
        ):
            raise LogIntegrityError(f"episode {entry.episode}: pool sizes disagree with the log")
    return state
