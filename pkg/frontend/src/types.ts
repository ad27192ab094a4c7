/**
 * Wire types for the annotation service protocol, plus runtime guards.
 *
 * The client trusts nothing: every server payload passes through a guard
 * before use, and outgoing submissions are validated locally so an
 * incomplete form can never reach the network.
 */

export const DIMENSIONS = ["clarity", "accuracy", "coverage", "overall"] as const;
export type DimensionName = (typeof DIMENSIONS)[number];

export const SCALE_MIN = 1;
export const SCALE_MAX = 5;

export interface DocumentPanes {
  title: string;
  abstract: string;
  claims: string;
}

export interface ScaleStep {
  value: number;
  anchor: string;
}

export interface DimensionSpec {
  name: string;
  scale: ScaleStep[];
}

export interface Progress {
  done: number;
  total: number;
}

export interface TaskPayload {
  task_id: string;
  document: DocumentPanes;
  summary_text: string;
  instructions: string;
  dimensions: DimensionSpec[];
  progress: Progress;
}

export interface NextTaskResponse {
  task: TaskPayload | null;
  done: boolean;
  progress?: Progress;
}

export type RatingScores = Record<DimensionName, number>;

export interface RatingSubmission extends RatingScores {
  session_id: string;
  task_id: string;
}

export class ProtocolError extends Error {}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function requireString(obj: Record<string, unknown>, key: string, context: string): string {
  const value = obj[key];
  if (typeof value !== "string") {
    throw new ProtocolError(`${context}: expected string field "${key}"`);
  }
  return value;
}

function requireNumber(obj: Record<string, unknown>, key: string, context: string): number {
  const value = obj[key];
  if (typeof value !== "number" || Number.isNaN(value)) {
    throw new ProtocolError(`${context}: expected numeric field "${key}"`);
  }
  return value;
}

export function asSessionResponse(json: unknown): string {
  if (!isRecord(json)) throw new ProtocolError("session response is not an object");
  return requireString(json, "session_id", "session response");
}

function asProgress(json: unknown, context: string): Progress {
  if (!isRecord(json)) throw new ProtocolError(`${context}: progress missing`);
  return {
    done: requireNumber(json, "done", context),
    total: requireNumber(json, "total", context),
  };
}

function asTask(json: unknown): TaskPayload {
  if (!isRecord(json)) throw new ProtocolError("task payload is not an object");
  const doc = json["document"];
  if (!isRecord(doc)) throw new ProtocolError("task payload: document missing");
  const dims = json["dimensions"];
  if (!Array.isArray(dims) || dims.length !== DIMENSIONS.length) {
    throw new ProtocolError("task payload: expected four dimension specs");
  }
  const dimensions = dims.map((d): DimensionSpec => {
    if (!isRecord(d)) throw new ProtocolError("task payload: malformed dimension");
    const scale = d["scale"];
    if (!Array.isArray(scale) || scale.length === 0) {
      throw new ProtocolError("task payload: dimension without scale anchors");
    }
    return {
      name: requireString(d, "name", "dimension"),
      scale: scale.map((s) => {
        if (!isRecord(s)) throw new ProtocolError("task payload: malformed scale step");
        return { value: requireNumber(s, "value", "scale step"), anchor: requireString(s, "anchor", "scale step") };
      }),
    };
  });
  return {
    task_id: requireString(json, "task_id", "task payload"),
    document: {
      title: requireString(doc, "title", "document"),
      abstract: requireString(doc, "abstract", "document"),
      claims: requireString(doc, "claims", "document"),
    },
    summary_text: requireString(json, "summary_text", "task payload"),
    instructions: requireString(json, "instructions", "task payload"),
    dimensions,
    progress: asProgress(json["progress"], "task payload"),
  };
}

export function asNextTaskResponse(json: unknown): NextTaskResponse {
  if (!isRecord(json)) throw new ProtocolError("next-task response is not an object");
  const done = json["done"];
  if (typeof done !== "boolean") throw new ProtocolError("next-task response: missing done flag");
  if (json["task"] === null || json["task"] === undefined) {
    if (!done) throw new ProtocolError("next-task response: no task but not done");
    return { task: null, done: true };
  }
  return { task: asTask(json["task"]), done };
}

export function asAck(json: unknown): string {
  if (!isRecord(json) || json["ok"] !== true) throw new ProtocolError("submission was not acknowledged");
  return requireString(json, "record_id", "ack");
}

/** Reject partial or out-of-scale score sets before they touch the network. */
export function validateScores(scores: Partial<RatingScores>): RatingScores {
  const out = {} as RatingScores;
  for (const dim of DIMENSIONS) {
    const value = scores[dim];
    if (value === undefined) throw new ProtocolError(`dimension "${dim}" is not rated yet`);
    if (!Number.isInteger(value) || value < SCALE_MIN || value > SCALE_MAX) {
      throw new ProtocolError(`dimension "${dim}" must be an integer in ${SCALE_MIN}..${SCALE_MAX}`);
    }
    out[dim] = value;
  }
  return out;
}
