/**
 * Playback gating for one utterance.
 *
 * Word selection unlocks the moment playback first starts; submission
 * unlocks after the audio has been played to the end twice. Only playback
 * reaching the end counts as a complete play: seeking (in either direction)
 * never increments the counter.
 */

export class PlayGate {
  private started = false;
  private completePlays = 0;

  constructor(private readonly minPlays: number = 2) {}

  onPlay(): void {
    this.started = true;
  }

  onEnded(): void {
    this.completePlays += 1;
  }

  onSeeked(): void {
    // Seeks never count toward plays; selection stays gated on `started`.
  }

  get playCount(): number {
    return this.completePlays;
  }

  get selectionEnabled(): boolean {
    return this.started;
  }

  get submitEnabled(): boolean {
    return this.completePlays >= this.minPlays;
  }

  /** Wire the gate to an audio element (or any compatible event target). */
  attach(audio: Pick<HTMLAudioElement, "addEventListener">): void {
    audio.addEventListener("play", () => this.onPlay());
    audio.addEventListener("ended", () => this.onEnded());
    audio.addEventListener("seeked", () => this.onSeeked());
  }
}
