/** Wire types of the annotation service API. */

export interface BatchItem {
  item_id: string;
  k: number;
  /** k exchanges, each [Speaker A text, Speaker B text]. */
  exchanges: [string, string][];
}

export interface BatchPayload {
  batch_id: string;
  items: BatchItem[];
}

export interface AnnotationPayload {
  item_id: string;
  labels: [WireLabel, WireLabel];
  preferences: Record<FeatureName, WireChoice>;
  duration_seconds: number;
}

export interface SubmitAck {
  ok: boolean;
  offset: number;
}

export interface ProgressCounts {
  fully: number;
  partially: number;
  pending: number;
}

export interface ProgressPayload {
  items: ProgressCounts;
  per_pair: Record<string, ProgressCounts>;
  per_segment_length: Record<string, ProgressCounts>;
}

export type WireLabel = "human" | "unsure" | "bot";
export type WireChoice = "first" | "tie" | "second";

export const FEATURES = ["fluency", "specificity", "sensibleness"] as const;
export type FeatureName = (typeof FEATURES)[number];

export const FEATURE_HELP: Record<FeatureName, string> = {
  fluency: "Which speaker's language is more fluent and grammatically correct?",
  sensibleness:
    "Which speaker's responses are more sensible? Confusing, illogical, " +
    "contradictory or factually wrong answers are NOT sensible.",
  specificity:
    "Which speaker's responses are more specific and explicit in the given " +
    "context? An answer is specific if it can be given only in the current context.",
};
