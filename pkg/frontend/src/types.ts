/** Wire and view-model types shared across the workbench. */

export type DotVisualState = 'default' | 'suggested' | 'bookmarked';

export interface PointRecord {
  id: number;
  x: number;
  y: number;
}

export interface PointDetail extends PointRecord {
  text: string;
}

export interface Suggestion {
  point_id: number;
  score: number;
}

export type FeedbackKind = 'bookmark_add' | 'bookmark_remove' | 'irrelevant_flag';

export type EventKind =
  | 'hover_start'
  | 'hover_end'
  | FeedbackKind
  | 'session_end';

export interface SessionEvent {
  seq: number;
  kind: EventKind;
  point_id: number | null;
  at: number;
}

export interface FeedbackResponse {
  accepted: number;
  applied_seq: number;
  utility: number;
  suggestions: Suggestion[];
}

export interface SessionInfo {
  session_id: string;
  policy: { kind: string; [key: string]: unknown };
  batch_size: number;
  budget_ms: number;
}

/** Colorblind-safe triple: remaining / suggested / bookmarked dots. */
export const DOT_COLORS: Record<DotVisualState, string> = {
  default: '#8073ac', // violet
  suggested: '#e08214', // orange
  bookmarked: '#1b9e77', // green
};
