/**
 * One annotator's pass through a 20-utterance batch.
 *
 * Utterances are visited strictly in order with no back-navigation:
 * advancing freezes the current utterance's labels and play count. The
 * submission payload is assembled only from frozen utterances and carries a
 * client-generated request token so retried submissions are idempotent.
 */

import { PlayGate } from "./playGate.js";
import { WordSelection } from "./selection.js";
import type { Batch, BatchUtterance, SubmitRequest, SubmittedUtterance } from "./types.js";

export interface FrozenUtterance {
  utterance_id: string;
  labels: number[];
  play_count: number;
}

function randomToken(): string {
  const bytes = new Uint8Array(12);
  if (typeof crypto !== "undefined" && crypto.getRandomValues) {
    crypto.getRandomValues(bytes);
  } else {
    for (let i = 0; i < bytes.length; i++) bytes[i] = Math.floor(Math.random() * 256);
  }
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

export class AnnotationSession {
  private position = 0;
  private readonly frozen: FrozenUtterance[] = [];
  private readonly startedAt: number;
  readonly requestToken: string;
  gate: PlayGate;
  selection: WordSelection;

  constructor(
    readonly batch: Batch,
    private readonly minPlays: number = 2,
    now: () => number = Date.now,
  ) {
    if (batch.utterances.length === 0) {
      throw new Error("batch has no utterances");
    }
    this.requestToken = randomToken();
    this.startedAt = now();
    this.gate = new PlayGate(minPlays);
    this.selection = new WordSelection(batch.utterances[0].tokens);
  }

  get size(): number {
    return this.batch.utterances.length;
  }

  /** 1-based progress for the "n of 20" display. */
  get progress(): { current: number; total: number } {
    return { current: Math.min(this.position + 1, this.size), total: this.size };
  }

  get complete(): boolean {
    return this.frozen.length === this.size;
  }

  current(): BatchUtterance {
    if (this.complete) {
      throw new Error("batch already complete");
    }
    return this.batch.utterances[this.position];
  }

  /** Toggle a word if playback has started; returns whether the click took. */
  clickWord(index: number): boolean {
    if (!this.gate.selectionEnabled) {
      return false;
    }
    this.selection.toggle(index);
    return true;
  }

  /**
   * Freeze the current utterance and move forward. Refuses below the
   * play-count minimum; there is no way back to a frozen utterance.
   */
  advance(): void {
    if (this.complete) {
      throw new Error("batch already complete");
    }
    if (!this.gate.submitEnabled) {
      throw new Error(
        `utterance played ${this.gate.playCount} times; minimum is ${this.minPlays}`,
      );
    }
    const utterance = this.current();
    const labels = this.selection.vector();
    if (labels.length !== utterance.tokens.length) {
      throw new Error("label vector does not match rendered word count");
    }
    this.frozen.push({
      utterance_id: utterance.utterance_id,
      labels,
      play_count: this.gate.playCount,
    });
    this.position += 1;
    if (!this.complete) {
      this.gate = new PlayGate(this.minPlays);
      this.selection = new WordSelection(this.batch.utterances[this.position].tokens);
    }
  }

  /** Submission payload; only valid once every utterance is frozen. */
  buildSubmission(now: () => number = Date.now): SubmitRequest {
    if (!this.complete) {
      throw new Error(
        `batch incomplete: ${this.frozen.length} of ${this.size} utterances done`,
      );
    }
    const utterances: SubmittedUtterance[] = this.frozen.map((f) => {
      if (f.play_count < this.minPlays) {
        throw new Error(`frozen utterance ${f.utterance_id} below play minimum`);
      }
      return { utterance_id: f.utterance_id, labels: f.labels, play_count: f.play_count };
    });
    return {
      batch_id: this.batch.batch_id,
      annotator_id: this.batch.annotator_id,
      utterances,
      session_seconds: (now() - this.startedAt) / 1000,
      request_token: this.requestToken,
    };
  }
}
