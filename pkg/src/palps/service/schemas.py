"""Pydantic request/response models for the annotation service API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class BoxModel(BaseModel):
    x_min: float
    y_min: float
    x_max: float
    y_max: float


class ClickModel(BaseModel):
    x: float
    y: float


class ImageModel(BaseModel):
    id: str
    width: float
    height: float
    difficulty: float = 0.0
    image_uri: Optional[str] = None
    objects: list[BoxModel] = Field(default_factory=list)


class ManifestModel(BaseModel):
    format_version: int = 1
    name: str
    class_names: list[str] = Field(default_factory=lambda: ["object"])
    images: list[ImageModel]


class RpfModel(BaseModel):
    epsilon: float
    alpha: float


class DetectorParamsModel(BaseModel):
    proposals_per_object: int = 5
    center_jitter_frac: float = 0.08
    size_jitter_frac: float = 0.10
    false_positive_rate: float = 1.0
    skill_tau: float = 150.0
    noise_scale: float = 0.15
    nms_iou: float = 0.5
    detection_floor: float = 0.5


class OracleModel(BaseModel):
    mode: Literal["simulated", "human"] = "human"
    click_jitter_frac: float = 0.0
    seed: int = 0


class RunConfigModel(BaseModel):
    method: str
    seed: int
    b_w: int = 50
    b_s: int = 25
    initial_labeled: int = 50
    budget: int = 300
    episode_cap: Optional[int] = None
    test_fraction: float = 0.4
    dataset: Optional[str] = None
    rpf: Optional[RpfModel] = None
    detector: DetectorParamsModel = Field(default_factory=DetectorParamsModel)
    oracle: OracleModel = Field(default_factory=OracleModel)
    lambda1: float = 1.0
    lambda2: float = 4.0
    entropy_aggregate: str = "sum"


class CreateRunRequest(BaseModel):
    config: RunConfigModel
    manifest: ManifestModel


class CreateRunResponse(BaseModel):
    run_id: str


class TaskImageModel(BaseModel):
    """Image reference inside a task: identity and display data only.

    Ground-truth boxes are deliberately absent; in human mode no endpoint
    may reveal labels the operator has not produced.
    """

    id: str
    width: float
    height: float
    image_uri: Optional[str] = None


class TaskModel(BaseModel):
    task_id: str
    run_id: str
    kind: Literal["type1", "type2"]
    image: TaskImageModel
    existing_clicks: list[ClickModel] = Field(default_factory=list)
    state: Literal["pending", "submitted"]


class TaskListResponse(BaseModel):
    tasks: list[TaskModel]


class AnnotationSubmission(BaseModel):
    task_id: str
    clicks: Optional[list[ClickModel]] = None
    boxes: Optional[list[BoxModel]] = None
    duration_ms: float = 0.0
    annotator_id: str = "anonymous"


class SubmissionResponse(BaseModel):
    ok: bool = True
    replaced: bool = False
    phase_advanced: bool = False


class MeasuredSecondsModel(BaseModel):
    type1: float = 0.0
    type2: float = 0.0


class StatusResponse(BaseModel):
    run_id: str
    phase: str
    episode: int
    pending_counts: dict[str, int]
    pools: dict[str, int]
    test_images: int
    ledger: dict
    map_at_50: Optional[float] = None
    measured_seconds: MeasuredSecondsModel
    error: Optional[str] = None


class ErrorResponse(BaseModel):
    error: str
