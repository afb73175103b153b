/** Payload shapes of the annotation service HTTP API. */

export interface PrescreenItem {
  id: string;
  prompt: string;
}

export interface PrescreenResult {
  passed: boolean;
  blocked: boolean;
}

export interface BatchUtterance {
  utterance_id: string;
  tokens: string[];
  audio_url: string;
  duration_seconds: number;
}

export interface Batch {
  batch_id: string;
  annotator_id: string;
  utterances: BatchUtterance[];
}

export interface SubmittedUtterance {
  utterance_id: string;
  labels: number[];
  play_count: number;
}

export interface SubmitRequest {
  batch_id: string;
  annotator_id: string;
  utterances: SubmittedUtterance[];
  session_seconds: number;
  request_token: string;
}

export interface SubmitResponse {
  status: "accepted" | "rejected";
  completion_code?: string;
  reason?: string;
}
