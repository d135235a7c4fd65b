/** Request/response bodies of the HTTP endpoints, mirrored from the service. */

export interface HealthBody {
  status: string;
  version: string;
  busy: boolean;
  alignment_active: boolean;
}

export interface ValidationBody {
  ok: boolean;
  missing_keys: string[];
  out_of_band: string[];
  warnings: string[];
  summary: string;
}

export interface RunStartedBody {
  run_id: string;
  kind: string;
  status: string;
  stream: string;
}

export interface FitBody {
  model: string;
  params: Record<string, number>;
  std_errors: Record<string, number>;
  reduced_chi_sq: number;
  converged: boolean;
  n_iterations: number;
  message: string;
}

export interface ResultBody {
  kind: string;
  seed: number;
  mode: string;
  axis_name: string;
  axis_unit: string;
  axis: number[];
  signal: number[];
  reference: number[] | null;
  derived: Record<string, number>;
  fit: FitBody | null;
  config: string;
  physics: string;
}

export interface ManifestBody {
  run_id: string;
  kind: string;
  seed: number;
  mode: string;
  status: string;
  started: string;
  finished: string;
  error: string;
  result_path: string;
}

export interface AlignmentKnobs {
  x_um: number;
  y_um: number;
  z_um: number;
  magnet_angle_deg: number;
  antenna_coupling: number;
}

export interface AlignmentBody extends AlignmentKnobs {
  beam_waist_um: number;
  expected_pl_rate_hz: number;
  active: boolean;
  interval_s: number;
  window_ns: number;
  stream: string;
}

export interface RunRequest {
  kind: string;
  config?: string | Record<string, unknown>;
  seed?: number;
  mode?: "photon-count" | "analog";
  physics?: string | Record<string, number> | null;
}

export interface DiagramBox {
  start_ns: number;
  length_ns: number;
  label: string;
  swept: boolean;
}

export interface DiagramLane {
  channel_id: number;
  kind: string;
  boxes: DiagramBox[];
}

export interface DiagramBody {
  label_mode: string;
  caption: string;
  lanes: DiagramLane[];
  svg: string;
}
