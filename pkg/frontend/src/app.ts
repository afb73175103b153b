/**
 * DOM wiring for the word-selection annotation task: prescreen form, audio
 * playback with play-count gating, click-to-boldface words, batch
 * progression, and submission.
 */

import { ApiClient, ApiError } from "./api.js";
import { AnnotationSession } from "./session.js";

export interface AudioLike {
  src: string;
  play(): Promise<void> | void;
  addEventListener(type: string, listener: () => void): void;
  load(): void;
}

export interface AppOptions {
  annotatorId: string;
  audioFactory?: () => AudioLike;
  minPlays?: number;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text) node.textContent = text;
  return node;
}

export class AnnotationApp {
  private session: AnnotationSession | null = null;
  private audio: AudioLike | null = null;
  private readonly doc: Document;
  private readonly audioFactory: () => AudioLike;
  private readonly minPlays: number;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly options: AppOptions,
  ) {
    this.doc = root.ownerDocument;
    this.audioFactory =
      options.audioFactory ?? (() => this.doc.createElement("audio") as AudioLike);
    this.minPlays = options.minPlays ?? 2;
  }

  async start(): Promise<void> {
    await this.showPrescreen();
  }

  private clear(): void {
    this.root.textContent = "";
  }

  private async showPrescreen(): Promise<void> {
    this.clear();
    const { items } = await this.client.prescreenItems();
    if (items.length === 0) {
      await this.startBatch();
      return;
    }
    const form = el(this.doc, "div", { "data-testid": "prescreen" });
    form.appendChild(
      el(this.doc, "p", {}, "Listening check: answer every question to continue."),
    );
    const inputs: HTMLInputElement[] = [];
    for (const item of items) {
      const row = el(this.doc, "label", {}, `${item.prompt} `);
      const input = el(this.doc, "input", { "data-testid": `prescreen-${item.id}` });
      inputs.push(input);
      row.appendChild(input);
      form.appendChild(row);
    }
    const message = el(this.doc, "p", { "data-testid": "prescreen-message" });
    const button = el(this.doc, "button", { "data-testid": "prescreen-submit" }, "Check");
    button.addEventListener("click", async () => {
      const result = await this.client.prescreen(
        this.options.annotatorId,
        inputs.map((input) => input.value),
      );
      if (result.passed) {
        await this.startBatch();
      } else if (result.blocked) {
        message.textContent = "Too many failed attempts; you cannot participate.";
        button.setAttribute("disabled", "true");
      } else {
        message.textContent = "That did not match the audio. Try again.";
      }
    });
    form.appendChild(button);
    form.appendChild(message);
    this.root.appendChild(form);
  }

  private async startBatch(): Promise<void> {
    try {
      const batch = await this.client.requestBatch(this.options.annotatorId);
      this.session = new AnnotationSession(batch, this.minPlays);
      this.renderTask();
    } catch (error) {
      this.clear();
      const detail = error instanceof ApiError ? error.detail : String(error);
      this.root.appendChild(
        el(this.doc, "p", { "data-testid": "fatal" }, `Cannot start: ${detail}`),
      );
    }
  }

  renderTask(): void {
    const session = this.session;
    if (!session) return;
    this.clear();
    const utterance = session.current();
    const view = el(this.doc, "div", { "data-testid": "task" });
    const { current, total } = session.progress;
    view.appendChild(
      el(this.doc, "p", { "data-testid": "progress" }, `Utterance ${current} of ${total}`),
    );
    view.appendChild(
      el(
        this.doc,
        "p",
        {},
        "Play the recording, then click every word the speaker emphasized. " +
          `Listen at least ${this.minPlays} times before continuing.`,
      ),
    );

    const audio = this.audioFactory();
    this.audio = audio;
    audio.src = this.client.audioUrl(utterance.audio_url);
    session.gate.attach(audio as unknown as HTMLAudioElement);

    const playButton = el(this.doc, "button", { "data-testid": "play" }, "Play");
    playButton.addEventListener("click", () => void audio.play());
    view.appendChild(playButton);

    const retry = el(this.doc, "button", { "data-testid": "retry", hidden: "true" }, "Retry audio");
    retry.addEventListener("click", () => {
      retry.setAttribute("hidden", "true");
      audio.load();
      void audio.play();
    });
    audio.addEventListener("error", () => retry.removeAttribute("hidden"));
    view.appendChild(retry);

    const playCounter = el(this.doc, "p", { "data-testid": "plays" }, "Complete plays: 0");
    view.appendChild(playCounter);

    const words = el(this.doc, "p", { "data-testid": "words" });
    utterance.tokens.forEach((token, index) => {
      const word = el(this.doc, "span", { class: "word", "data-word": String(index) }, token);
      word.addEventListener("click", () => {
        if (session.clickWord(index)) {
          word.classList.toggle("selected", session.selection.isSelected(index));
        }
      });
      words.appendChild(word);
      words.appendChild(this.doc.createTextNode(" "));
    });
    view.appendChild(words);

    const next = el(
      this.doc,
      "button",
      { "data-testid": "next", disabled: "true" },
      session.progress.current === total ? "Finish batch" : "Next utterance",
    );
    const refresh = () => {
      playCounter.textContent = `Complete plays: ${session.gate.playCount}`;
      if (session.gate.submitEnabled) {
        next.removeAttribute("disabled");
      }
    };
    audio.addEventListener("ended", refresh);
    audio.addEventListener("play", refresh);
    next.addEventListener("click", () => {
      if (!session.gate.submitEnabled) return;
      session.advance();
      if (session.complete) {
        void this.submitBatch();
      } else {
        this.renderTask();
      }
    });
    view.appendChild(next);
    this.root.appendChild(view);
  }

  private async submitBatch(): Promise<void> {
    const session = this.session;
    if (!session) return;
    this.clear();
    const status = el(this.doc, "p", { "data-testid": "status" }, "Submitting...");
    this.root.appendChild(status);
    try {
      const response = await this.client.submit(session.buildSubmission());
      if (response.status === "accepted") {
        status.textContent = `Batch accepted. Completion code: ${response.completion_code}`;
      } else {
        status.textContent = `Batch rejected: ${response.reason ?? "quality check failed"}`;
      }
    } catch (error) {
      const detail = error instanceof ApiError ? error.detail : String(error);
      status.textContent = `Submission failed: ${detail}`;
      const retry = el(this.doc, "button", { "data-testid": "resubmit" }, "Retry submission");
      // idempotent: the session's request token makes retries safe
      retry.addEventListener("click", () => void this.submitBatch());
      this.root.appendChild(retry);
    }
  }
}

export function mountApp(root: HTMLElement, baseUrl: string, options: AppOptions): AnnotationApp {
  const app = new AnnotationApp(root, new ApiClient(baseUrl), options);
  void app.start();
  return app;
}
