// Wire types mirrored from the annotation service's JSON schemas.

export interface Point {
  x: number;
  y: number;
}

export interface Box {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export type TaskKind = "type1" | "type2";

export interface TaskImage {
  id: string;
  width: number;
  height: number;
  image_uri?: string | null;
}

export interface AnnotationTask {
  task_id: string;
  run_id: string;
  kind: TaskKind;
  image: TaskImage;
  existing_clicks: Point[];
  state: "pending" | "submitted";
}

export interface SubmissionResult {
  ok: boolean;
  replaced: boolean;
  phase_advanced: boolean;
}

export interface RunStatus {
  run_id: string;
  phase: string;
  episode: number;
  pending_counts: Record<string, number>;
  pools: Record<string, number>;
  test_images: number;
  ledger: Record<string, string | number>;
  map_at_50: number | null;
  measured_seconds: { type1: number; type2: number };
  error: string | null;
}
