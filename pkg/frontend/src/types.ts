// Wire types mirroring the placement service's JSON payloads.

export interface ObjectSpec {
  id: number;
  shape: string;
  center: [number, number];
  size: [number, number];
  color: [number, number, number];
  depth_rank: number;
  support_id: number | null;
  container_id: number | null;
  name: string;
}

export interface SceneSpec {
  width: number;
  height: number;
  table_region: [number, number, number, number];
  objects: ObjectSpec[];
  seed: number;
  depth_scale: number;
}

export interface ScenePayload {
  scene: SceneSpec;
  render_png: string; // base64
}

export interface ParsedInstruction {
  relation: string;
  reference_name: string;
  subject_name: string;
  raw_text: string;
}

export interface HeatmapChannel {
  png_b64: string;
  normalization: number;
}

export interface InstructPayload {
  parsed: ParsedInstruction;
  subject_mismatch: boolean;
  reference_id: number;
  width: number;
  height: number;
  channels: Record<string, HeatmapChannel>;
}

export interface PlacePayload extends ScenePayload {
  placement: [number, number];
  object_id: number;
}

export interface ReportRow {
  count: number;
  mean_likert: number;
  success_rate: number;
}

export interface HistoryEntry {
  instruction: string;
  parsed: ParsedInstruction;
  placement: [number, number] | null;
  rating: { likert: number; success: boolean } | null;
}

export interface ReportPayload {
  per_relation: Record<string, ReportRow>;
  history: HistoryEntry[];
}

export interface CalibrationPayload {
  marker: [number, number];
  png_b64: string;
  normalization: number;
  width: number;
  height: number;
}

export const RELATIONS = [
  "inside",
  "left",
  "right",
  "in_front",
  "behind",
  "on_top",
] as const;

export type Relation = (typeof RELATIONS)[number];
